#pragma once

#include <functional>
#include <vector>

#include "capsnet/tensor.hpp"

namespace capsnet {

// Reverse-mode gradient tape. Ops append nodes in execution order, which is
// a valid topological order; backward() walks them once, in reverse,
// accumulating (+=) into per-slot gradient buffers so shared parameters sum
// contributions from every use site.
template <typename T>
class GradientTape {
 public:
  // Reserve a gradient slot for a tensor of the given element count.
  int track(std::size_t numel) {
    slots_.emplace_back(numel, T(0));
    return static_cast<int>(slots_.size()) - 1;
  }

  // Mark an existing tensor (typically a parameter) as differentiable.
  void watch(Tensor<T>& t) { t.grad_id = track(t.size()); }

  void record(std::function<void(GradientTape<T>&)> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }

  std::vector<T>& grad_slot(int id) { return slots_.at(static_cast<std::size_t>(id)); }
  const std::vector<T>& grad_slot(int id) const { return slots_.at(static_cast<std::size_t>(id)); }

  const std::vector<T>& grad(const Tensor<T>& t) const {
    if (t.grad_id < 0) throw InputError("grad() on a tensor not tracked by this tape");
    return grad_slot(t.grad_id);
  }

  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1)
      throw InputError("backward() requires a scalar loss, got shape " + shape_str(loss.shape));
    if (loss.grad_id < 0)
      throw InputError("backward() loss was not produced on this tape");
    grad_slot(loss.grad_id).assign(1, T(1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
  }

  void reset() {
    nodes_.clear();
    slots_.clear();
  }

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  std::vector<std::function<void(GradientTape<T>&)>> nodes_;
  std::vector<std::vector<T>> slots_;
};

}  // namespace capsnet
