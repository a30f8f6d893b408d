#pragma once

#include <string>
#include <vector>

#include "capsnet/capsules.hpp"
#include "capsnet/ops.hpp"

namespace capsnet {

struct LossConfig {
  double m_plus = 0.9;
  double m_minus = 0.1;
  double lambda_down = 0.5;
  double reconstruction_scale = 0.0005;
};

struct DecoderConfig {
  std::vector<int> hidden_sizes = {512, 1024};
  int output_dim = 3072;
};

// y = x W + b for a flat input vector x[n], W[n,m], b[m].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b,
                 GradientTape<T>* tape = nullptr) {
  auto row = ops::reshape(x, {1, x.dim(0)}, tape);
  auto y = ops::matmul(row, W, tape);
  y = ops::add(y, ops::reshape(b, {1, b.dim(0)}, tape), tape);
  return ops::reshape(y, {b.dim(0)}, tape);
}

// Two-sided hinge on capsule lengths. All capsules beyond the labeled one,
// including a NOTA capsule when present, contribute as negatives.
template <typename T>
Tensor<T> margin_loss(const Tensor<T>& v, int label, const LossConfig& cfg, int num_real_classes,
                      GradientTape<T>* tape = nullptr) {
  if (v.ndim() != 2) throw ShapeError("margin_loss: need [N,d] capsule tensor");
  if (label < 0 || label >= num_real_classes)
    throw InputError("margin_loss: label " + std::to_string(label) + " out of range [0," +
                     std::to_string(num_real_classes) + ")");
  const int n = v.dim(0);
  auto norms = ops::l2_norm_along_last_axis(v, T(1e-9), tape);

  const T mp = static_cast<T>(cfg.m_plus), mm = static_cast<T>(cfg.m_minus),
          lam = static_cast<T>(cfg.lambda_down);
  T total = T(0);
  for (int k = 0; k < n; ++k) {
    const T nk = norms.at(k);
    if (k == label) {
      const T h = std::max(T(0), mp - nk);
      total += h * h;
    } else {
      const T h = std::max(T(0), nk - mm);
      total += lam * h * h;
    }
  }
  Tensor<T> out = Tensor<T>::scalar(total);
  if (tape && norms.grad_id >= 0) {
    out.grad_id = tape->track(1);
    int oid = out.grad_id, nid = norms.grad_id;
    auto nd = norms.data;
    tape->record([=](GradientTape<T>& t) {
      const T g = t.grad_slot(oid)[0];
      auto& gn = t.grad_slot(nid);
      for (int k = 0; k < n; ++k) {
        const T nk = (*nd)[k];
        if (k == label)
          gn[k] += g * T(-2) * std::max(T(0), mp - nk);
        else
          gn[k] += g * lam * T(2) * std::max(T(0), nk - mm);
      }
    });
  }
  return out;
}

template <typename T>
struct DecoderParams {
  // weights[i] is [in,out]; biases[i] is [out]
  std::vector<Tensor<T>> weights;
  std::vector<Tensor<T>> biases;
};

// Decode a masked capsule tensor back to pixel space:
// dense(relu) ... dense(relu) -> dense(sigmoid).
template <typename T>
Tensor<T> decode(const Tensor<T>& masked_flat, const DecoderParams<T>& dec,
                 GradientTape<T>* tape = nullptr) {
  Tensor<T> h = masked_flat;
  const std::size_t n_layers = dec.weights.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    h = linear(h, dec.weights[l], dec.biases[l], tape);
    h = (l + 1 == n_layers) ? ops::sigmoid(h, tape) : ops::relu(h, tape);
  }
  return h;
}

template <typename T>
struct ReconstructionResult {
  Tensor<T> reconstruction;
  Tensor<T> loss;  // sum of squared pixel errors
};

// Mask all activity vectors except `target`, decode, and score against the
// flattened input image (pixels in [0,1]).
template <typename T>
ReconstructionResult<T> masked_reconstruction(const Tensor<T>& v, int target,
                                              const DecoderParams<T>& dec, const Tensor<T>& image,
                                              GradientTape<T>* tape = nullptr) {
  if (target < 0 || target >= v.dim(0))
    throw InputError("masked_reconstruction: target " + std::to_string(target) +
                     " out of range for " + shape_str(v.shape));
  auto masked = ops::mask_rows(v, target, tape);
  auto flat = ops::reshape(masked, {v.dim(0) * v.dim(1)}, tape);
  auto recon = decode(flat, dec, tape);
  if (recon.size() != image.size())
    throw ShapeError("masked_reconstruction: decoder output " + shape_str(recon.shape) +
                     " vs image " + shape_str(image.shape));
  auto img_flat = ops::reshape(image, {static_cast<int>(image.size())}, tape);
  auto diff = ops::subtract(recon, img_flat, tape);
  auto loss = ops::sum(ops::multiply(diff, diff, tape), tape);
  return {recon, loss};
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& margin, const Tensor<T>& recon, const LossConfig& cfg,
                     GradientTape<T>* tape = nullptr) {
  return ops::add(margin, ops::scale(recon, static_cast<T>(cfg.reconstruction_scale), tape), tape);
}

}  // namespace capsnet
