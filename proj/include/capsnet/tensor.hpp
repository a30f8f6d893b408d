#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace capsnet {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};
struct InputError : std::runtime_error {
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. Storage is shared between copies; ops never
// mutate an existing buffer except the designated in-place parameter
// updates in the optimizer.
template <typename T>
struct Tensor {
  Shape shape;
  std::shared_ptr<std::vector<T>> data;
  int grad_id = -1;  // slot on a GradientTape, -1 when untracked

  Tensor() = default;
  Tensor(Shape s, std::shared_ptr<std::vector<T>> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data->size())
      throw ShapeError("tensor data size " + std::to_string(data->size()) +
                       " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) {
    auto n = shape_numel(s);
    return Tensor(std::move(s), std::make_shared<std::vector<T>>(n, T(0)));
  }
  static Tensor full(Shape s, T value) {
    auto n = shape_numel(s);
    return Tensor(std::move(s), std::make_shared<std::vector<T>>(n, value));
  }
  static Tensor from(Shape s, std::vector<T> values) {
    return Tensor(std::move(s), std::make_shared<std::vector<T>>(std::move(values)));
  }
  static Tensor scalar(T value) { return from({1}, {value}); }

  std::size_t size() const { return data ? data->size() : 0; }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int ndim() const { return static_cast<int>(shape.size()); }
  T* ptr() { return data->data(); }
  const T* ptr() const { return data->data(); }
  T& at(std::size_t i) { return (*data)[i]; }
  T at(std::size_t i) const { return (*data)[i]; }

  T item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape));
    return (*data)[0];
  }

  // Deep copy detached from any tape.
  Tensor detached_copy() const {
    return Tensor(shape, std::make_shared<std::vector<T>>(*data));
  }

  template <typename U>
  Tensor<U> cast() const {
    auto out = std::make_shared<std::vector<U>>(size());
    for (std::size_t i = 0; i < size(); ++i) (*out)[i] = static_cast<U>((*data)[i]);
    return Tensor<U>(shape, std::move(out));
  }
};

// Debug-mode NaN/Inf screening for forward ops. Off by default; hot loops
// pay nothing in release runs.
inline bool& finite_checks_enabled() {
  static bool enabled = false;
  return enabled;
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op_name) {
  if (!finite_checks_enabled()) return;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite((*t.data)[i]))
      throw NumericError(std::string(op_name) + " produced a non-finite value at index " +
                         std::to_string(i));
  }
}

}  // namespace capsnet
