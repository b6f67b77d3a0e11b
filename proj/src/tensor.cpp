#include "efrlfn/tensor.hpp"

#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace efrlfn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

template <typename T>
Tensor<T>::Tensor() : impl_(std::make_shared<detail::TensorImpl<T>>()) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  impl_->shape = shape;
  impl_->data.assign(shape.numel(), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  if (values.size() != shape.numel()) {
    throw std::invalid_argument("tensor: shape " + shape.str() + " needs " +
                                std::to_string(shape.numel()) + " values, got " +
                                std::to_string(values.size()));
  }
  impl_->shape = shape;
  impl_->data = std::move(values);
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (impl_->grad_fn) {
    throw std::logic_error("tensor: op results are immutable");
  }
  return impl_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("tensor: item() on shape " + shape().str());
  }
  return impl_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (impl_->grad_fn) {
    throw std::logic_error("tensor: requires_grad can only be set on leaves");
  }
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(impl_->shape, impl_->data);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> values, std::string name,
                                 std::vector<Tensor> inputs, detail::BackwardFn<T> backward) {
  Tensor out(shape, std::move(values));
  if (!NoGradGuard::grad_enabled()) {
    return out;
  }
  bool needs_grad = false;
  for (const auto& in : inputs) {
    needs_grad = needs_grad || in.requires_grad();
  }
  if (!needs_grad) {
    return out;
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->name = std::move(name);
  node->backward = std::move(backward);
  node->inputs.reserve(inputs.size());
  for (auto& in : inputs) {
    node->inputs.push_back(in.impl_);
  }
  out.impl_->requires_grad = true;
  out.impl_->grad_fn = std::move(node);
  return out;
}

namespace {

// Post-order DFS: every tensor appears after all of its inputs.
template <typename T>
std::vector<detail::TensorImpl<T>*> topological_order(detail::TensorImpl<T>* root) {
  std::vector<detail::TensorImpl<T>*> order;
  std::unordered_set<detail::TensorImpl<T>*> visited;
  std::vector<std::pair<detail::TensorImpl<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    const auto& inputs = impl->grad_fn->inputs;
    if (next < inputs.size()) {
      detail::TensorImpl<T>* child = inputs[next++].get();
      if (child->grad_fn && child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(impl);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                loss.shape().str());
  }
  if (!loss.requires_grad()) {
    return;
  }
  detail::TensorImpl<T>* root = loss.impl().get();
  if (!root->grad_fn) {
    root->grad.resize(1, T(0));
    root->grad[0] += T(1);
    return;
  }

  const auto order = topological_order(root);
  std::unordered_map<detail::TensorImpl<T>*, std::vector<T>> pending;
  pending[root].assign(1, T(1));

  std::vector<std::vector<T>*> slots;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl<T>* impl = *it;
    auto found = pending.find(impl);
    if (found == pending.end()) {
      continue;
    }
    const std::vector<T> grad_out = std::move(found->second);
    pending.erase(found);

    const auto& node = *impl->grad_fn;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      detail::TensorImpl<T>* in = node.inputs[i].get();
      if (!in->requires_grad) {
        continue;
      }
      std::vector<T>& target = in->grad_fn ? pending[in] : in->grad;
      if (target.empty()) {
        target.assign(in->data.size(), T(0));
      }
      slots[i] = &target;
    }
    node.backward(grad_out, slots);
  }
}

template <typename T>
std::size_t graph_size(const Tensor<T>& t) {
  if (!t.impl()->grad_fn) {
    return 0;
  }
  return topological_order(t.impl().get()).size();
}

template class Tensor<float>;
template class Tensor<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template std::size_t graph_size(const Tensor<float>&);
template std::size_t graph_size(const Tensor<double>&);

}  // namespace efrlfn
