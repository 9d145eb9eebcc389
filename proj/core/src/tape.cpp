#include "gpte/tape.hpp"

#include "gpte/error.hpp"

namespace gpte {

const Tensor& Var::value() const {
  return tape_->value(*this);
}

const Tensor& Var::grad() const {
  return tape_->grad(*this);
}

Var Tape::leaf(Tensor value) {
  value.ensure_finite("leaf");
  Node node;
  node.value = std::move(value);
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Tensor value) {
  value.ensure_finite("constant");
  Node node;
  node.value = std::move(value);
  node.needs_grad = false;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Tensor value, std::initializer_list<int> parents, Backprop backprop) {
  Node node;
  node.value = std::move(value);
  for (int p : parents) {
    if (nodes_[static_cast<std::size_t>(p)].needs_grad) {
      node.needs_grad = true;
      break;
    }
  }
  if (node.needs_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor* Tape::grad_buffer(int id) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.needs_grad) return nullptr;
  if (node.grad.empty()) node.grad = Tensor::zeros(node.value.shape());
  return &node.grad;
}

void Tape::add_grad(int id, const Tensor& delta) {
  Tensor* buffer = grad_buffer(id);
  if (!buffer) return;
  if (!buffer->same_shape(delta)) {
    throw ShapeError("tape: gradient shape " + shape_str(delta.shape()) +
                     " does not match value shape " + shape_str(buffer->shape()));
  }
  double* dst = buffer->data();
  const double* src = delta.data();
  for (std::size_t i = 0, n = delta.size(); i < n; ++i) dst[i] += src[i];
}

void Tape::backward(const Var& root) {
  if (root.tape() != this) {
    throw UsageError("tape: backward root belongs to a different tape");
  }
  if (backward_done_) {
    throw UsageError("tape: backward may run once per tape");
  }
  backward_done_ = true;
  Node& root_node = nodes_[static_cast<std::size_t>(root.id())];
  if (root_node.value.size() != 1) {
    throw UsageError("tape: backward requires a scalar root, got shape " +
                     shape_str(root_node.value.shape()));
  }
  root_node.grad = Tensor::full(root_node.value.shape(), 1.0);
  for (int id = root.id(); id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.grad.empty() || !node.backprop) continue;
    node.backprop(*this, id);
  }
}

const Tensor& Tape::grad(const Var& v) const {
  return nodes_[static_cast<std::size_t>(v.id())].grad;
}

Tensor Tape::take_grad(const Var& v) {
  Node& node = nodes_[static_cast<std::size_t>(v.id())];
  if (node.grad.empty()) return Tensor::zeros(node.value.shape());
  return std::move(node.grad);
}

}  // namespace gpte
