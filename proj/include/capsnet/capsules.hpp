#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "capsnet/ops.hpp"

namespace capsnet {

enum class Activation { kSquash, kCustom };

inline const char* activation_name(Activation a) {
  return a == Activation::kSquash ? "squash" : "custom";
}

struct PrimaryCapsuleConfig {
  int num_capsule_types = 32;
  int capsule_dim = 8;
  int kernel = 9;
  int stride = 2;
};

struct RoutingCapsuleConfig {
  int num_out_capsules = 10;
  int out_dim = 16;
  int routing_iterations = 3;
};

// Routing internals surfaced for inspection: logits b, final couplings c,
// prediction vectors uhat, and the couplings after each iteration.
template <typename T>
struct RoutingState {
  Tensor<T> logits;
  Tensor<T> couplings;
  Tensor<T> predictions;
  std::vector<Tensor<T>> coupling_history;
};

namespace detail {

// Length gain applied to each capsule vector: v = gain(n) * s where n = |s|.
//   squash: n/(1+n^2)        -> |v| = n^2/(1+n^2)
//   custom: (1-e^-n)/n       -> |v| = 1-e^-n
template <typename T>
Tensor<T> capsule_gain(const Tensor<T>& norms, Activation act, GradientTape<T>* tape = nullptr) {
  if (act == Activation::kSquash)
    return ops::unary_op(
        norms, tape, "squash_gain", [](T n) { return n / (T(1) + n * n); },
        [](T n, T) {
          T d = T(1) + n * n;
          return (T(1) - n * n) / (d * d);
        });
  return ops::unary_op(
      norms, tape, "custom_gain", [](T n) { return -std::expm1(-n) / n; },
      [](T n, T) { return (std::exp(-n) * (n + T(1)) - T(1)) / (n * n); });
}

}  // namespace detail

// Vector nonlinearity v = (|s|^2/(1+|s|^2)) * s/|s|, applied per row of [N,d].
template <typename T>
Tensor<T> squash(const Tensor<T>& s, GradientTape<T>* tape = nullptr) {
  auto n = ops::l2_norm_along_last_axis(s, T(1e-9), tape);
  auto f = detail::capsule_gain(n, Activation::kSquash, tape);
  return ops::scale_rows(s, f, tape);
}

// v = (1 - e^-|s|) * s/|s|, per row of [N,d].
template <typename T>
Tensor<T> custom_activation(const Tensor<T>& s, GradientTape<T>* tape = nullptr) {
  auto n = ops::l2_norm_along_last_axis(s, T(1e-9), tape);
  auto f = detail::capsule_gain(n, Activation::kCustom, tape);
  return ops::scale_rows(s, f, tape);
}

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& s, Activation act, GradientTape<T>* tape = nullptr) {
  return act == Activation::kSquash ? squash(s, tape) : custom_activation(s, tape);
}

// Convolutional capsule formation: conv over the feature map, reshape each
// group of capsule_dim channels at each grid position into one capsule, squash.
template <typename T>
Tensor<T> primary_capsules(const Tensor<T>& features, const PrimaryCapsuleConfig& cfg,
                           const Tensor<T>& kernels, const Tensor<T>& bias,
                           GradientTape<T>* tape = nullptr) {
  const int channels = cfg.num_capsule_types * cfg.capsule_dim;
  if (kernels.dim(0) != channels)
    throw ShapeError("primary_capsules: kernel count " + std::to_string(kernels.dim(0)) +
                     " != num_capsule_types*capsule_dim = " + std::to_string(channels));
  auto conv = ops::conv2d(features, kernels, cfg.stride, tape);
  conv = ops::add_channel_bias(conv, bias, tape);
  const int grid = conv.dim(1) * conv.dim(2);
  // channel layout is [type*dim, gy, gx]; one capsule = dim consecutive
  // channel planes sampled at a fixed grid cell
  const int n_caps = cfg.num_capsule_types * grid;
  Tensor<T> raw = Tensor<T>::zeros({n_caps, cfg.capsule_dim});
  // gather: capsule (t,g) component k = conv[t*dim+k, g]
  auto flat = ops::reshape(conv, {channels, grid}, tape);
  // permutation expressed as a fixed gather so the gradient is the scatter
  std::vector<std::size_t> src_index(static_cast<std::size_t>(n_caps) * cfg.capsule_dim);
  for (int t = 0; t < cfg.num_capsule_types; ++t)
    for (int g = 0; g < grid; ++g)
      for (int k = 0; k < cfg.capsule_dim; ++k)
        src_index[(static_cast<std::size_t>(t) * grid + g) * cfg.capsule_dim + k] =
            static_cast<std::size_t>(t * cfg.capsule_dim + k) * grid + g;
  for (std::size_t i = 0; i < src_index.size(); ++i) raw.at(i) = flat.at(src_index[i]);
  if (tape && flat.grad_id >= 0) {
    raw.grad_id = tape->track(raw.size());
    int oid = raw.grad_id, fid = flat.grad_id;
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(src_index));
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      auto& gf = t.grad_slot(fid);
      for (std::size_t i = 0; i < g.size(); ++i) gf[(*idx)[i]] += g[i];
    });
  }
  return squash(raw, tape);
}

// Routing by agreement. Gradients flow through the prediction vectors and the
// final coupling-weighted sum only; the logit updates are treated as
// non-differentiable, so intermediate iterations run on detached values.
//
// frozen_couplings replays a previously captured coupling matrix instead of
// iterating. Finite-difference checks need this: the differentiated function
// holds the couplings fixed, so the numeric probe must too.
template <typename T>
std::pair<Tensor<T>, RoutingState<T>> routed_capsules(const Tensor<T>& u,
                                                      const RoutingCapsuleConfig& cfg,
                                                      const Tensor<T>& W, Activation act,
                                                      GradientTape<T>* tape = nullptr,
                                                      const Tensor<T>* frozen_couplings =
                                                          nullptr) {
  if (cfg.routing_iterations < 1)
    throw ConfigError("routed_capsules: routing_iterations must be >= 1");
  if (W.ndim() != 4 || W.dim(1) != cfg.num_out_capsules || W.dim(2) != cfg.out_dim)
    throw ShapeError("routed_capsules: W " + shape_str(W.shape) + " does not match config");
  const int n_in = u.dim(0), n_out = cfg.num_out_capsules, d_out = cfg.out_dim;

  auto uhat = ops::capsule_predictions(u, W, tape);
  Tensor<T> uhat_v = uhat.detached_copy();

  RoutingState<T> state;
  state.predictions = uhat_v;
  if (frozen_couplings != nullptr) {
    state.logits = Tensor<T>::zeros({n_in, n_out});
    state.couplings = *frozen_couplings;
    auto s = ops::coupling_sum(uhat, *frozen_couplings, tape);
    return {apply_activation(s, act, tape), std::move(state)};
  }
  Tensor<T> b = Tensor<T>::zeros({n_in, n_out});
  Tensor<T> c;
  Tensor<T> v_out;
  for (int r = 0; r < cfg.routing_iterations; ++r) {
    c = ops::softmax_along_axis(b, 1);
    state.coupling_history.push_back(c);
    const bool last = (r == cfg.routing_iterations - 1);
    if (last) {
      auto s = ops::coupling_sum(uhat, c, tape);
      v_out = apply_activation(s, act, tape);
    } else {
      auto s = ops::coupling_sum(uhat_v, c);
      auto v = apply_activation(s, act);
      // agreement update b_ij += uhat_ij . v_j
      for (int i = 0; i < n_in; ++i)
        for (int j = 0; j < n_out; ++j) {
          T dot = T(0);
          const T* uh = uhat_v.ptr() + (static_cast<std::size_t>(i) * n_out + j) * d_out;
          const T* vj = v.ptr() + static_cast<std::size_t>(j) * d_out;
          for (int a = 0; a < d_out; ++a) dot += uh[a] * vj[a];
          b.at(i * n_out + j) += dot;
        }
    }
  }
  state.logits = b;
  state.couplings = c;
  return {v_out, state};
}

// Capsule-to-capsule layer: same routing contract, no grid structure.
template <typename T>
std::pair<Tensor<T>, RoutingState<T>> stack_capsule_layer(
    const Tensor<T>& v, const RoutingCapsuleConfig& cfg, const Tensor<T>& W, Activation act,
    GradientTape<T>* tape = nullptr, const Tensor<T>* frozen_couplings = nullptr) {
  return routed_capsules(v, cfg, W, act, tape, frozen_couplings);
}

}  // namespace capsnet
