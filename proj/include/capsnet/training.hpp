#pragma once

#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include "capsnet/data.hpp"
#include "capsnet/model.hpp"

namespace capsnet {

struct MetricRecord {
  int epoch = 0;
  double margin_loss = 0.0;
  double recon_loss = 0.0;
  double total_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainOptions {
  int batch_size = 128;
  AugmentationConfig augment;
};

template <typename T>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m, v;  // aligned with model.param_tensors

  void init(const Model<T>& model) {
    m.clear();
    v.clear();
    for (const auto& p : model.param_tensors) {
      m.emplace_back(p.size(), T(0));
      v.emplace_back(p.size(), T(0));
    }
    step = 0;
  }

  void apply(Model<T>& model, const std::vector<std::vector<T>>& grads) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, double(step));
    const double bc2 = 1.0 - std::pow(beta2, double(step));
    for (std::size_t pi = 0; pi < model.param_tensors.size(); ++pi) {
      auto& p = model.param_tensors[pi];
      auto& mi = m[pi];
      auto& vi = v[pi];
      const auto& g = grads[pi];
      for (std::size_t i = 0; i < p.size(); ++i) {
        mi[i] = T(beta1 * mi[i] + (1.0 - beta1) * g[i]);
        vi[i] = T(beta2 * vi[i] + (1.0 - beta2) * g[i] * g[i]);
        const double mhat = mi[i] / bc1;
        const double vhat = vi[i] / bc2;
        p.at(i) = T(p.at(i) - lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

inline int worker_thread_count() {
  if (const char* env = std::getenv("CAPSNET_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

// Loss for one sample: margin on the class capsules plus scaled masked
// reconstruction, masked by the true label.
template <typename T>
struct SampleLoss {
  Tensor<T> total, margin, recon;
};

template <typename T>
SampleLoss<T> sample_loss(Model<T>& model, const Tensor<T>& image, int label,
                          GradientTape<T>* tape = nullptr) {
  auto out = forward(model, image, tape);
  auto margin = margin_loss(out.class_capsules, label, model.cfg.loss, model.cfg.num_classes,
                            tape);
  auto dec = model.decoder();
  auto rec = masked_reconstruction(out.class_capsules, label, dec, image, tape);
  auto total = total_loss(margin, rec.loss, model.cfg.loss, tape);
  return {total, margin, rec.loss};
}

// One full pass over the split: per-sample backward, gradients averaged over
// the batch, one Adam step per batch. The caller fills val_accuracy.
template <typename T>
MetricRecord train_epoch(Model<T>& model, const DatasetSplit& split, AdamState<T>& adam,
                         int epoch, const TrainOptions& opts) {
  BatchStream stream(split, opts.batch_size, static_cast<std::uint64_t>(epoch), opts.augment);
  MetricRecord rec;
  rec.epoch = epoch;
  double sum_margin = 0, sum_recon = 0, sum_total = 0;
  std::size_t n_samples = 0;

  std::vector<std::vector<T>> grad_accum;
  for (const auto& p : model.param_tensors) grad_accum.emplace_back(p.size(), T(0));

  GradientTape<T> tape;
  int batch_index = 0;
  while (auto batch = stream.next()) {
    for (auto& g : grad_accum) std::fill(g.begin(), g.end(), T(0));
    const std::size_t bn = batch->images.size();
    for (std::size_t s = 0; s < bn; ++s) {
      tape.reset();
      for (auto& p : model.param_tensors) tape.watch(p);
      Tensor<T> img = batch->images[s].template cast<T>();
      auto loss = sample_loss(model, img, batch->labels[s], &tape);
      const double lt = loss.total.item();
      if (!std::isfinite(lt))
        throw NumericError("NaN/Inf loss in batch " + std::to_string(batch_index) +
                           " (sample index " + std::to_string(batch->indices[s]) + ")");
      sum_margin += loss.margin.item();
      sum_recon += loss.recon.item();
      sum_total += lt;
      ++n_samples;
      tape.backward(loss.total);
      for (std::size_t pi = 0; pi < model.param_tensors.size(); ++pi) {
        const auto& g = tape.grad(model.param_tensors[pi]);
        auto& acc = grad_accum[pi];
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
      }
    }
    tape.reset();  // drop captured buffers before touching parameters
    const T inv = T(1) / static_cast<T>(bn);
    for (auto& g : grad_accum)
      for (auto& x : g) x *= inv;
    adam.apply(model, grad_accum);
    ++batch_index;
  }
  rec.margin_loss = sum_margin / double(n_samples);
  rec.recon_loss = sum_recon / double(n_samples);
  rec.total_loss = sum_total / double(n_samples);
  return rec;
}

// Accuracy over a split; prediction is argmax over real-class capsule
// lengths. Shards across CAPSNET_THREADS read-only workers.
template <typename T>
double evaluate(Model<T>& model, const DatasetSplit& split, const AugmentationConfig& aug = {}) {
  const int n_threads = std::min(worker_thread_count(), std::max(1, split.n));
  std::vector<int> correct(static_cast<std::size_t>(n_threads), 0);
  const bool cropping = aug.enabled && aug.crop_size > 0 && aug.crop_size < split.height;
  auto run_range = [&](int tid, int begin, int end) {
    int c = 0;
    for (int i = begin; i < end; ++i) {
      Tensor<float> img = split.image(i);
      if (cropping)
        img = crop_image(img, aug.crop_size, (split.height - aug.crop_size) / 2,
                         (split.width - aug.crop_size) / 2);
      Tensor<T> x = img.template cast<T>();
      auto out = forward(model, x);
      if (predict_class(model.cfg, out.class_capsules) == split.labels[std::size_t(i)]) ++c;
    }
    correct[std::size_t(tid)] = c;
  };
  if (n_threads == 1) {
    run_range(0, 0, split.n);
  } else {
    std::vector<std::thread> workers;
    const int per = (split.n + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t)
      workers.emplace_back(run_range, t, t * per, std::min(split.n, (t + 1) * per));
    for (auto& w : workers) w.join();
  }
  int total = 0;
  for (int c : correct) total += c;
  return double(total) / double(split.n);
}

}  // namespace capsnet
