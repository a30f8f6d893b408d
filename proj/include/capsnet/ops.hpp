#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "capsnet/tape.hpp"
#include "capsnet/tensor.hpp"

namespace capsnet::ops {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

template <typename T>
bool tracked(const Tensor<T>& t) {
  return t.grad_id >= 0;
}

template <typename T>
int maybe_track_output(GradientTape<T>* tape, Tensor<T>& out, bool any_input_tracked) {
  if (tape == nullptr || !any_input_tracked) return -1;
  out.grad_id = tape->track(out.size());
  return out.grad_id;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops (same shape).

template <typename T, typename Fwd, typename Bwd>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, GradientTape<T>* tape,
                    const char* name, Fwd fwd, Bwd bwd) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = fwd(a.at(i), b.at(i));
  check_finite(out, name);
  if (detail::maybe_track_output(tape, out, detail::tracked(a) || detail::tracked(b)) >= 0) {
    int oid = out.grad_id, aid = a.grad_id, bid = b.grad_id;
    auto ad = a.data, bd = b.data;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      for (std::size_t i = 0; i < g.size(); ++i) {
        T da, db;
        bwd((*ad)[i], (*bd)[i], g[i], da, db);
        if (aid >= 0) t.grad_slot(aid)[i] += da;
        if (bid >= 0) t.grad_slot(bid)[i] += db;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, GradientTape<T>* tape = nullptr) {
  return binary_op(
      a, b, tape, "add", [](T x, T y) { return x + y; },
      [](T, T, T g, T& da, T& db) {
        da = g;
        db = g;
      });
}

template <typename T>
Tensor<T> subtract(const Tensor<T>& a, const Tensor<T>& b, GradientTape<T>* tape = nullptr) {
  return binary_op(
      a, b, tape, "subtract", [](T x, T y) { return x - y; },
      [](T, T, T g, T& da, T& db) {
        da = g;
        db = -g;
      });
}

template <typename T>
Tensor<T> multiply(const Tensor<T>& a, const Tensor<T>& b, GradientTape<T>* tape = nullptr) {
  return binary_op(
      a, b, tape, "multiply", [](T x, T y) { return x * y; },
      [](T x, T y, T g, T& da, T& db) {
        da = g * y;
        db = g * x;
      });
}

// ---------------------------------------------------------------------------
// Elementwise unary ops.

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_op(const Tensor<T>& a, GradientTape<T>* tape, const char* name, Fwd fwd, Bwd bwd) {
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = fwd(a.at(i));
  check_finite(out, name);
  if (detail::maybe_track_output(tape, out, detail::tracked(a)) >= 0) {
    int oid = out.grad_id, aid = a.grad_id;
    auto ad = a.data, od = out.data;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      auto& ga = t.grad_slot(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd((*ad)[i], (*od)[i]);
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor, GradientTape<T>* tape = nullptr) {
  return unary_op(
      a, tape, "scale", [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a, GradientTape<T>* tape = nullptr) {
  return unary_op(
      a, tape, "relu", [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a, GradientTape<T>* tape = nullptr) {
  return unary_op(
      a, tape, "sigmoid", [](T x) { return T(1) / (T(1) + std::exp(-x)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> exponential(const Tensor<T>& a, GradientTape<T>* tape = nullptr) {
  return unary_op(
      a, tape, "exponential", [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename T>
Tensor<T> sum(const Tensor<T>& a, GradientTape<T>* tape = nullptr) {
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i);
  Tensor<T> out = Tensor<T>::scalar(acc);
  check_finite(out, "sum");
  if (detail::maybe_track_output(tape, out, detail::tracked(a)) >= 0) {
    int oid = out.grad_id, aid = a.grad_id;
    tape->record([=](GradientTape<T>& t) {
      T g = t.grad_slot(oid)[0];
      auto& ga = t.grad_slot(aid);
      for (auto& v : ga) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, GradientTape<T>* tape = nullptr) {
  return scale(sum(a, tape), T(1) / static_cast<T>(a.size()), tape);
}

// ---------------------------------------------------------------------------
// Shape ops.

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape, GradientTape<T>* tape = nullptr) {
  if (shape_numel(new_shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape) + " as " + shape_str(new_shape));
  Tensor<T> out(std::move(new_shape), a.data);  // shares storage
  if (detail::maybe_track_output(tape, out, detail::tracked(a)) >= 0) {
    int oid = out.grad_id, aid = a.grad_id;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      auto& ga = t.grad_slot(aid);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

// Concatenate along axis 0; trailing dimensions must agree.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, GradientTape<T>* tape = nullptr) {
  if (parts.empty()) throw InputError("concat: empty input list");
  Shape tail(parts[0].shape.begin() + 1, parts[0].shape.end());
  int dim0 = 0;
  bool any_tracked = false;
  for (const auto& p : parts) {
    Shape ptail(p.shape.begin() + 1, p.shape.end());
    if (ptail != tail)
      throw ShapeError("concat: trailing shape mismatch " + shape_str(p.shape) + " vs " +
                       shape_str(parts[0].shape));
    dim0 += p.dim(0);
    any_tracked = any_tracked || detail::tracked(p);
  }
  Shape out_shape = parts[0].shape;
  out_shape[0] = dim0;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::memcpy(out.ptr() + off, p.ptr(), p.size() * sizeof(T));
    off += p.size();
  }
  if (detail::maybe_track_output(tape, out, any_tracked) >= 0) {
    int oid = out.grad_id;
    std::vector<int> ids;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
      ids.push_back(p.grad_id);
      sizes.push_back(p.size());
    }
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      std::size_t o = 0;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        if (ids[k] >= 0) {
          auto& gp = t.grad_slot(ids[k]);
          for (std::size_t i = 0; i < sizes[k]; ++i) gp[i] += g[o + i];
        }
        o += sizes[k];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// matmul.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, GradientTape<T>* tape = nullptr) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape) + " and " +
                     shape_str(b.shape));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out = Tensor<T>::zeros({m, n});
  MatMap<T>(out.ptr(), m, n).noalias() =
      ConstMatMap<T>(a.ptr(), m, k) * ConstMatMap<T>(b.ptr(), k, n);
  check_finite(out, "matmul");
  if (detail::maybe_track_output(tape, out, detail::tracked(a) || detail::tracked(b)) >= 0) {
    int oid = out.grad_id, aid = a.grad_id, bid = b.grad_id;
    auto ad = a.data, bd = b.data;
    tape->record([=](GradientTape<T>& t) {
      ConstMatMap<T> g(t.grad_slot(oid).data(), m, n);
      if (aid >= 0)
        MatMap<T>(t.grad_slot(aid).data(), m, k).noalias() +=
            g * ConstMatMap<T>(bd->data(), k, n).transpose();
      if (bid >= 0)
        MatMap<T>(t.grad_slot(bid).data(), k, n).noalias() +=
            ConstMatMap<T>(ad->data(), m, k).transpose() * g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d: valid cross-correlation, single image [C,H,W].

namespace detail {

// cols is [C*K*K, Ho*Wo]
template <typename T>
std::shared_ptr<std::vector<T>> im2col(const T* in, int c_in, int h, int w, int k, int stride,
                                       int ho, int wo) {
  auto cols = std::make_shared<std::vector<T>>(
      static_cast<std::size_t>(c_in) * k * k * ho * wo, T(0));
  T* cp = cols->data();
  const int ncols = ho * wo;
  for (int c = 0; c < c_in; ++c)
    for (int ki = 0; ki < k; ++ki)
      for (int kj = 0; kj < k; ++kj) {
        const int row = (c * k + ki) * k + kj;
        const T* src = in + (static_cast<std::size_t>(c) * h + ki) * w + kj;
        T* dst = cp + static_cast<std::size_t>(row) * ncols;
        for (int oy = 0; oy < ho; ++oy) {
          const T* s = src + static_cast<std::size_t>(oy) * stride * w;
          for (int ox = 0; ox < wo; ++ox) dst[oy * wo + ox] = s[ox * stride];
        }
      }
  return cols;
}

template <typename T>
void col2im_accumulate(const T* cols, T* din, int c_in, int h, int w, int k, int stride, int ho,
                       int wo) {
  const int ncols = ho * wo;
  for (int c = 0; c < c_in; ++c)
    for (int ki = 0; ki < k; ++ki)
      for (int kj = 0; kj < k; ++kj) {
        const int row = (c * k + ki) * k + kj;
        const T* src = cols + static_cast<std::size_t>(row) * ncols;
        T* dst = din + (static_cast<std::size_t>(c) * h + ki) * w + kj;
        for (int oy = 0; oy < ho; ++oy) {
          T* d = dst + static_cast<std::size_t>(oy) * stride * w;
          for (int ox = 0; ox < wo; ++ox) d[ox * stride] += src[oy * wo + ox];
        }
      }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, int stride,
                 GradientTape<T>* tape = nullptr) {
  if (input.ndim() != 3 || kernels.ndim() != 4)
    throw ShapeError("conv2d: expected input [C,H,W] and kernels [F,C,K,K], got " +
                     shape_str(input.shape) + " and " + shape_str(kernels.shape));
  const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int c_out = kernels.dim(0), k = kernels.dim(2);
  if (kernels.dim(1) != c_in || kernels.dim(3) != k)
    throw ShapeError("conv2d: kernel shape " + shape_str(kernels.shape) +
                     " incompatible with input " + shape_str(input.shape));
  if (k > h || k > w)
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than input " +
                     shape_str(input.shape));
  if (stride < 1) throw ShapeError("conv2d: stride must be positive");
  const int ho = (h - k) / stride + 1, wo = (w - k) / stride + 1;
  const int ckk = c_in * k * k, ncols = ho * wo;

  auto cols = detail::im2col(input.ptr(), c_in, h, w, k, stride, ho, wo);
  Tensor<T> out = Tensor<T>::zeros({c_out, ho, wo});
  MatMap<T>(out.ptr(), c_out, ncols).noalias() =
      ConstMatMap<T>(kernels.ptr(), c_out, ckk) * ConstMatMap<T>(cols->data(), ckk, ncols);
  check_finite(out, "conv2d");

  if (detail::maybe_track_output(tape, out, detail::tracked(input) || detail::tracked(kernels)) >=
      0) {
    int oid = out.grad_id, iid = input.grad_id, kid = kernels.grad_id;
    auto kd = kernels.data;
    tape->record([=](GradientTape<T>& t) {
      ConstMatMap<T> g(t.grad_slot(oid).data(), c_out, ncols);
      if (kid >= 0)
        MatMap<T>(t.grad_slot(kid).data(), c_out, ckk).noalias() +=
            g * ConstMatMap<T>(cols->data(), ckk, ncols).transpose();
      if (iid >= 0) {
        std::vector<T> dcols(static_cast<std::size_t>(ckk) * ncols);
        MatMap<T>(dcols.data(), ckk, ncols).noalias() =
            ConstMatMap<T>(kd->data(), c_out, ckk).transpose() * g;
        detail::col2im_accumulate(dcols.data(), t.grad_slot(iid).data(), c_in, h, w, k, stride,
                                  ho, wo);
      }
    });
  }
  return out;
}

// x[C,H,W] + b[C], broadcast over the spatial grid.
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b,
                           GradientTape<T>* tape = nullptr) {
  if (x.ndim() != 3 || b.ndim() != 1 || b.dim(0) != x.dim(0))
    throw ShapeError("add_channel_bias: " + shape_str(x.shape) + " vs " + shape_str(b.shape));
  const int c = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor<T> out = Tensor<T>::zeros(x.shape);
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < plane; ++i) out.at(ch * plane + i) = x.at(ch * plane + i) + b.at(ch);
  check_finite(out, "add_channel_bias");
  if (detail::maybe_track_output(tape, out, detail::tracked(x) || detail::tracked(b)) >= 0) {
    int oid = out.grad_id, xid = x.grad_id, bid = b.grad_id;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      if (xid >= 0) {
        auto& gx = t.grad_slot(xid);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bid >= 0) {
        auto& gb = t.grad_slot(bid);
        for (int ch = 0; ch < c; ++ch) {
          T acc = T(0);
          for (std::size_t i = 0; i < plane; ++i) acc += g[ch * plane + i];
          gb[ch] += acc;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// softmax along an axis of a 2-D tensor.

template <typename T>
Tensor<T> softmax_along_axis(const Tensor<T>& x, int axis, GradientTape<T>* tape = nullptr) {
  if (x.ndim() != 2 || (axis != 0 && axis != 1))
    throw ShapeError("softmax_along_axis: need 2-D tensor and axis 0 or 1");
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape);
  const int outer = axis == 1 ? rows : cols;
  const int inner = axis == 1 ? cols : rows;
  auto idx = [axis, cols](int o, int i) { return axis == 1 ? o * cols + i : i * cols + o; };
  for (int o = 0; o < outer; ++o) {
    T mx = x.at(idx(o, 0));
    for (int i = 1; i < inner; ++i) mx = std::max(mx, x.at(idx(o, i)));
    T z = T(0);
    for (int i = 0; i < inner; ++i) {
      T e = std::exp(x.at(idx(o, i)) - mx);
      out.at(idx(o, i)) = e;
      z += e;
    }
    for (int i = 0; i < inner; ++i) out.at(idx(o, i)) /= z;
  }
  check_finite(out, "softmax_along_axis");
  if (detail::maybe_track_output(tape, out, detail::tracked(x)) >= 0) {
    int oid = out.grad_id, xid = x.grad_id;
    auto od = out.data;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      auto& gx = t.grad_slot(xid);
      for (int o = 0; o < outer; ++o) {
        T dot = T(0);
        for (int i = 0; i < inner; ++i) dot += g[idx(o, i)] * (*od)[idx(o, i)];
        for (int i = 0; i < inner; ++i)
          gx[idx(o, i)] += (*od)[idx(o, i)] * (g[idx(o, i)] - dot);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Capsule-oriented primitives.

// Per-row Euclidean norm of [N,d]: n_i = sqrt(sum_j x_ij^2 + eps).
template <typename T>
Tensor<T> l2_norm_along_last_axis(const Tensor<T>& x, T eps = T(1e-9),
                                  GradientTape<T>* tape = nullptr) {
  if (x.ndim() != 2) throw ShapeError("l2_norm_along_last_axis: need 2-D [N,d]");
  const int n = x.dim(0), d = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros({n});
  for (int i = 0; i < n; ++i) {
    T acc = eps;
    for (int j = 0; j < d; ++j) acc += x.at(i * d + j) * x.at(i * d + j);
    out.at(i) = std::sqrt(acc);
  }
  check_finite(out, "l2_norm_along_last_axis");
  if (detail::maybe_track_output(tape, out, detail::tracked(x)) >= 0) {
    int oid = out.grad_id, xid = x.grad_id;
    auto xd = x.data, od = out.data;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      auto& gx = t.grad_slot(xid);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gx[i * d + j] += g[i] * (*xd)[i * d + j] / (*od)[i];
    });
  }
  return out;
}

// Row-wise scaling: out[i,:] = x[i,:] * f[i].
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& f, GradientTape<T>* tape = nullptr) {
  if (x.ndim() != 2 || f.ndim() != 1 || f.dim(0) != x.dim(0))
    throw ShapeError("scale_rows: " + shape_str(x.shape) + " vs " + shape_str(f.shape));
  const int n = x.dim(0), d = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.at(i * d + j) = x.at(i * d + j) * f.at(i);
  check_finite(out, "scale_rows");
  if (detail::maybe_track_output(tape, out, detail::tracked(x) || detail::tracked(f)) >= 0) {
    int oid = out.grad_id, xid = x.grad_id, fid = f.grad_id;
    auto xd = x.data, fd = f.data;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      for (int i = 0; i < n; ++i) {
        if (xid >= 0) {
          auto& gx = t.grad_slot(xid);
          for (int j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * (*fd)[i];
        }
        if (fid >= 0) {
          T acc = T(0);
          for (int j = 0; j < d; ++j) acc += g[i * d + j] * (*xd)[i * d + j];
          t.grad_slot(fid)[i] += acc;
        }
      }
    });
  }
  return out;
}

// Zero every row of [N,d] except keep_index; used for reconstruction masking.
template <typename T>
Tensor<T> mask_rows(const Tensor<T>& x, int keep_index, GradientTape<T>* tape = nullptr) {
  if (x.ndim() != 2) throw ShapeError("mask_rows: need 2-D [N,d]");
  if (keep_index < 0 || keep_index >= x.dim(0))
    throw InputError("mask_rows: index " + std::to_string(keep_index) + " out of range for " +
                     shape_str(x.shape));
  const int d = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape);
  for (int j = 0; j < d; ++j) out.at(keep_index * d + j) = x.at(keep_index * d + j);
  if (detail::maybe_track_output(tape, out, detail::tracked(x)) >= 0) {
    int oid = out.grad_id, xid = x.grad_id;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      auto& gx = t.grad_slot(xid);
      for (int j = 0; j < d; ++j) gx[keep_index * d + j] += g[keep_index * d + j];
    });
  }
  return out;
}

// Prediction vectors: uhat[i,j,:] = W[i,j,:,:] * u[i,:]
// u is [N_in,d_in], W is [N_in,N_out,d_out,d_in], result [N_in,N_out,d_out].
template <typename T>
Tensor<T> capsule_predictions(const Tensor<T>& u, const Tensor<T>& W,
                              GradientTape<T>* tape = nullptr) {
  if (u.ndim() != 2 || W.ndim() != 4 || W.dim(0) != u.dim(0) || W.dim(3) != u.dim(1))
    throw ShapeError("capsule_predictions: " + shape_str(u.shape) + " vs " + shape_str(W.shape));
  const int n_in = u.dim(0), d_in = u.dim(1), n_out = W.dim(1), d_out = W.dim(2);
  const int od = n_out * d_out;
  Tensor<T> out = Tensor<T>::zeros({n_in, n_out, d_out});
  for (int i = 0; i < n_in; ++i) {
    ConstMatMap<T> wi(W.ptr() + static_cast<std::size_t>(i) * od * d_in, od, d_in);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(out.ptr() + static_cast<std::size_t>(i) * od,
                                                    od)
        .noalias() =
        wi * Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(
                 u.ptr() + static_cast<std::size_t>(i) * d_in, d_in);
  }
  check_finite(out, "capsule_predictions");
  if (detail::maybe_track_output(tape, out, detail::tracked(u) || detail::tracked(W)) >= 0) {
    int oid = out.grad_id, uid = u.grad_id, wid = W.grad_id;
    auto udta = u.data, wdta = W.data;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      for (int i = 0; i < n_in; ++i) {
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> gi(
            g.data() + static_cast<std::size_t>(i) * od, od);
        if (wid >= 0) {
          MatMap<T> gw(t.grad_slot(wid).data() + static_cast<std::size_t>(i) * od * d_in, od,
                       d_in);
          gw.noalias() += gi * Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(
                                   udta->data() + static_cast<std::size_t>(i) * d_in, d_in)
                                   .transpose();
        }
        if (uid >= 0) {
          ConstMatMap<T> wi(wdta->data() + static_cast<std::size_t>(i) * od * d_in, od, d_in);
          Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(
              t.grad_slot(uid).data() + static_cast<std::size_t>(i) * d_in, d_in)
              .noalias() += wi.transpose() * gi;
        }
      }
    });
  }
  return out;
}

// s[j,:] = sum_i c[i,j] * uhat[i,j,:]; c is a constant (stop-gradient).
template <typename T>
Tensor<T> coupling_sum(const Tensor<T>& uhat, const Tensor<T>& c, GradientTape<T>* tape = nullptr) {
  if (uhat.ndim() != 3 || c.ndim() != 2 || c.dim(0) != uhat.dim(0) || c.dim(1) != uhat.dim(1))
    throw ShapeError("coupling_sum: " + shape_str(uhat.shape) + " vs " + shape_str(c.shape));
  const int n_in = uhat.dim(0), n_out = uhat.dim(1), d = uhat.dim(2);
  Tensor<T> out = Tensor<T>::zeros({n_out, d});
  for (int i = 0; i < n_in; ++i)
    for (int j = 0; j < n_out; ++j) {
      const T cij = c.at(i * n_out + j);
      const T* src = uhat.ptr() + (static_cast<std::size_t>(i) * n_out + j) * d;
      T* dst = out.ptr() + static_cast<std::size_t>(j) * d;
      for (int a = 0; a < d; ++a) dst[a] += cij * src[a];
    }
  check_finite(out, "coupling_sum");
  if (detail::maybe_track_output(tape, out, detail::tracked(uhat)) >= 0) {
    int oid = out.grad_id, uid = uhat.grad_id;
    auto cd = c.data;
    tape->record([=](GradientTape<T>& t) {
      const auto& g = t.grad_slot(oid);
      auto& gu = t.grad_slot(uid);
      for (int i = 0; i < n_in; ++i)
        for (int j = 0; j < n_out; ++j) {
          const T cij = (*cd)[i * n_out + j];
          for (int a = 0; a < d; ++a)
            gu[(static_cast<std::size_t>(i) * n_out + j) * d + a] += cij * g[j * d + a];
        }
    });
  }
  return out;
}

}  // namespace capsnet::ops
