#pragma once

// Rank-4 NCHW tensor with reverse-mode differentiation.
//
// A Tensor is a shared handle: copying it aliases the same storage, the way
// framework tensors behave. Every tensor produced by an op while gradient
// recording is enabled owns a Node that knows how to push its gradient back
// to its inputs. backward() walks those nodes in reverse topological order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace efrlfn {

struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t numel() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node;

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;
};

// grads[i] is null when input i needs no gradient; otherwise the rule adds
// d(loss)/d(input i) into it.
template <typename T>
using BackwardFn =
    std::function<void(std::span<const T> grad_out, std::span<std::vector<T>* const> grads)>;

template <typename T>
struct Node {
  std::string name;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  BackwardFn<T> backward;
};

}  // namespace detail

// Thread-local switch for gradient recording. Inference paths construct one
// to avoid building graphs they will never differentiate.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor();
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(shape); }
  static Tensor ones(Shape shape) { return Tensor(shape, T(1)); }
  static Tensor scalar(T value) { return Tensor(Shape{1, 1, 1, 1}, value); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  bool defined() const { return impl_ != nullptr; }

  std::span<const T> data() const { return impl_->data; }
  // Writable storage, only for leaves (parameters, inputs). Op results are
  // immutable because their backward rules may hold on to them.
  std::span<T> mutable_data();

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Shape& s = impl_->shape;
    return ((n * s.c + c) * s.h + h) * s.w + w;
  }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return impl_->data[offset(n, c, h, w)];
  }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return impl_->grad_fn == nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  // Deep copy of the values with no graph attached.
  Tensor clone() const;
  // Shares nothing with the graph; values are copied.
  Tensor detach() const { return clone(); }

  const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }

  // Wraps an op result. Records a node when recording is on and any input
  // requires a gradient.
  static Tensor make_result(Shape shape, std::vector<T> values, std::string name,
                            std::vector<Tensor> inputs, detail::BackwardFn<T> backward);

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl<T>> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

// Populates grad on every requires_grad leaf reachable from `loss`.
// Gradients accumulate across calls until zero_grad().
template <typename T>
void backward(const Tensor<T>& loss);

// Number of graph nodes reachable from `t` (test and diagnostics helper).
template <typename T>
std::size_t graph_size(const Tensor<T>& t);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace efrlfn
