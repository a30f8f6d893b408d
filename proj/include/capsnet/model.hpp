#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "capsnet/capsules.hpp"
#include "capsnet/losses.hpp"

namespace capsnet {

struct ConvLayerConfig {
  int filters = 256;
  int kernel = 9;
  int stride = 1;
};

struct ModelConfig {
  int input_channels = 3;
  int input_size = 32;  // spatial size the network actually sees (after any crop)
  int num_classes = 10;
  std::vector<ConvLayerConfig> conv_layers = {{256, 9, 1}};
  PrimaryCapsuleConfig primary;
  std::vector<RoutingCapsuleConfig> stacked;  // optional capsule layers between primary and output
  RoutingCapsuleConfig output;
  Activation activation = Activation::kSquash;
  LossConfig loss;
  std::vector<int> decoder_hidden = {512, 1024};
  bool nota = false;
  std::uint64_t seed = 0;

  int num_output_capsules() const { return num_classes + (nota ? 1 : 0); }
  int decoder_output_dim() const { return input_channels * input_size * input_size; }
};

struct ShapeChain {
  std::vector<std::pair<int, int>> conv_out;  // (channels, spatial) after each conv
  int primary_grid = 0;
  int primary_capsules = 0;
};

// Walks the whole conv -> primary -> routing chain, throwing ConfigError at
// the first layer that cannot be realized.
inline ShapeChain validate_config(const ModelConfig& cfg) {
  ShapeChain chain;
  int size = cfg.input_size;
  for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
    const auto& cl = cfg.conv_layers[i];
    if (cl.kernel > size || cl.stride < 1 || cl.filters < 1)
      throw ConfigError("conv layer " + std::to_string(i + 1) + ": kernel " +
                        std::to_string(cl.kernel) + " does not fit feature map of size " +
                        std::to_string(size));
    size = (size - cl.kernel) / cl.stride + 1;
    chain.conv_out.emplace_back(cl.filters, size);
  }
  if (cfg.primary.kernel > size)
    throw ConfigError("primary capsule layer: kernel " + std::to_string(cfg.primary.kernel) +
                      " does not fit feature map of size " + std::to_string(size));
  chain.primary_grid = (size - cfg.primary.kernel) / cfg.primary.stride + 1;
  chain.primary_capsules =
      cfg.primary.num_capsule_types * chain.primary_grid * chain.primary_grid;
  for (std::size_t i = 0; i < cfg.stacked.size(); ++i)
    if (cfg.stacked[i].routing_iterations < 1 || cfg.stacked[i].num_out_capsules < 1)
      throw ConfigError("stacked capsule layer " + std::to_string(i + 1) + ": invalid config");
  if (cfg.output.routing_iterations < 1)
    throw ConfigError("output capsule layer: routing_iterations must be >= 1");
  if (cfg.output.num_out_capsules != cfg.num_output_capsules())
    throw ConfigError("output capsule layer: " + std::to_string(cfg.output.num_out_capsules) +
                      " capsules configured but " + std::to_string(cfg.num_output_capsules()) +
                      " required (num_classes=" + std::to_string(cfg.num_classes) +
                      (cfg.nota ? ", nota" : "") + ")");
  return chain;
}

template <typename T>
struct Model {
  ModelConfig cfg;
  std::vector<std::string> param_names;  // stable order for tapes and checkpoints
  std::vector<Tensor<T>> param_tensors;

  Tensor<T>& param(const std::string& name) {
    for (std::size_t i = 0; i < param_names.size(); ++i)
      if (param_names[i] == name) return param_tensors[i];
    throw InputError("unknown parameter: " + name);
  }
  const Tensor<T>& param(const std::string& name) const {
    return const_cast<Model*>(this)->param(name);
  }
  void add_param(const std::string& name, Tensor<T> t) {
    for (const auto& n : param_names)
      if (n == name) throw ConfigError("duplicate parameter name: " + name);
    param_names.push_back(name);
    param_tensors.push_back(std::move(t));
  }

  DecoderParams<T> decoder() const {
    DecoderParams<T> dec;
    const std::size_t n_layers = cfg.decoder_hidden.size() + 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
      dec.weights.push_back(param("decoder.w" + std::to_string(l + 1)));
      dec.biases.push_back(param("decoder.b" + std::to_string(l + 1)));
    }
    return dec;
  }

  template <typename U>
  Model<U> cast() const {
    Model<U> out;
    out.cfg = cfg;
    out.param_names = param_names;
    for (const auto& t : param_tensors) out.param_tensors.push_back(t.template cast<U>());
    return out;
  }
};

namespace detail {

template <typename T>
Tensor<T> normal_init(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = static_cast<T>(dist(rng));
  return t;
}

}  // namespace detail

// Deterministic parameter initialization from cfg.seed: conv kernels use a
// fan-in scaled normal, routing matrices std 0.05, biases zero.
template <typename T>
Model<T> build_model(const ModelConfig& cfg) {
  ShapeChain chain = validate_config(cfg);
  Model<T> model;
  model.cfg = cfg;
  std::mt19937_64 rng(cfg.seed);

  int in_ch = cfg.input_channels;
  for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
    const auto& cl = cfg.conv_layers[i];
    const double std_dev = 1.0 / std::sqrt(double(in_ch) * cl.kernel * cl.kernel);
    model.add_param("conv" + std::to_string(i + 1) + ".kernels",
                    detail::normal_init<T>({cl.filters, in_ch, cl.kernel, cl.kernel}, std_dev,
                                           rng));
    model.add_param("conv" + std::to_string(i + 1) + ".bias", Tensor<T>::zeros({cl.filters}));
    in_ch = cl.filters;
  }

  const int primary_ch = cfg.primary.num_capsule_types * cfg.primary.capsule_dim;
  const double primary_std =
      1.0 / std::sqrt(double(in_ch) * cfg.primary.kernel * cfg.primary.kernel);
  model.add_param("primary.kernels",
                  detail::normal_init<T>(
                      {primary_ch, in_ch, cfg.primary.kernel, cfg.primary.kernel}, primary_std,
                      rng));
  model.add_param("primary.bias", Tensor<T>::zeros({primary_ch}));

  int n_in = chain.primary_capsules;
  int d_in = cfg.primary.capsule_dim;
  for (std::size_t i = 0; i < cfg.stacked.size(); ++i) {
    const auto& sc = cfg.stacked[i];
    model.add_param("stack" + std::to_string(i + 1) + ".W",
                    detail::normal_init<T>({n_in, sc.num_out_capsules, sc.out_dim, d_in}, 0.05,
                                           rng));
    n_in = sc.num_out_capsules;
    d_in = sc.out_dim;
  }
  model.add_param("output.W",
                  detail::normal_init<T>(
                      {n_in, cfg.output.num_out_capsules, cfg.output.out_dim, d_in}, 0.05, rng));

  int dec_in = cfg.output.num_out_capsules * cfg.output.out_dim;
  std::vector<int> dec_sizes = cfg.decoder_hidden;
  dec_sizes.push_back(cfg.decoder_output_dim());
  for (std::size_t l = 0; l < dec_sizes.size(); ++l) {
    const int dec_out = dec_sizes[l];
    model.add_param("decoder.w" + std::to_string(l + 1),
                    detail::normal_init<T>({dec_in, dec_out}, 1.0 / std::sqrt(double(dec_in)),
                                           rng));
    model.add_param("decoder.b" + std::to_string(l + 1), Tensor<T>::zeros({dec_out}));
    dec_in = dec_out;
  }
  return model;
}

template <typename T>
struct ForwardOutput {
  Tensor<T> class_capsules;  // [num_output_capsules, out_dim]
  RoutingState<T> routing;   // state of the output routing layer
};

// Captured couplings of every routing layer in forward order; replayed by
// finite-difference probes so they differentiate the same (stop-gradient)
// function the tape records.
template <typename T>
struct FrozenCouplings {
  std::vector<Tensor<T>> layers;
};

template <typename T>
ForwardOutput<T> forward(Model<T>& model, const Tensor<T>& image,
                         GradientTape<T>* tape = nullptr,
                         FrozenCouplings<T>* capture = nullptr,
                         const FrozenCouplings<T>* replay = nullptr) {
  const ModelConfig& cfg = model.cfg;
  Tensor<T> x = image;
  for (std::size_t i = 0; i < cfg.conv_layers.size(); ++i) {
    const std::string p = "conv" + std::to_string(i + 1);
    x = ops::conv2d(x, model.param(p + ".kernels"), cfg.conv_layers[i].stride, tape);
    x = ops::add_channel_bias(x, model.param(p + ".bias"), tape);
    x = ops::relu(x, tape);
  }
  Tensor<T> caps = primary_capsules(x, cfg.primary, model.param("primary.kernels"),
                                    model.param("primary.bias"), tape);
  std::size_t layer_index = 0;
  auto frozen_for = [&](std::size_t li) -> const Tensor<T>* {
    return replay ? &replay->layers.at(li) : nullptr;
  };
  for (std::size_t i = 0; i < cfg.stacked.size(); ++i) {
    auto [v, st] = stack_capsule_layer(caps, cfg.stacked[i],
                                       model.param("stack" + std::to_string(i + 1) + ".W"),
                                       cfg.activation, tape, frozen_for(layer_index));
    if (capture) capture->layers.push_back(st.couplings);
    ++layer_index;
    caps = v;
  }
  auto [v, st] = routed_capsules(caps, cfg.output, model.param("output.W"), cfg.activation, tape,
                                 frozen_for(layer_index));
  if (capture) capture->layers.push_back(st.couplings);
  return {v, std::move(st)};
}

// argmax over real-class capsule lengths; a NOTA capsule never wins.
template <typename T>
int predict_class(const ModelConfig& cfg, const Tensor<T>& class_capsules) {
  auto norms = ops::l2_norm_along_last_axis(class_capsules, T(1e-9));
  int best = 0;
  for (int k = 1; k < cfg.num_classes; ++k)
    if (norms.at(k) > norms.at(best)) best = k;
  return best;
}

}  // namespace capsnet
