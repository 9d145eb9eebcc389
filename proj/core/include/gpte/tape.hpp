#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gpte/rng.hpp"
#include "gpte/tensor.hpp"

namespace gpte {

class Tape;

enum class ActivationKind { kRelu, kGelu };

// Handle to a node owned by a Tape. Copying a Var does not copy the tensor;
// using one Var at several graph sites is how parameter sharing works: each
// site's backward contribution is summed into the single node gradient.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Tensor& grad() const;
  Tape* tape() const noexcept { return tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Ordered record of one differentiable computation. Ops append nodes as they
// execute; backward() replays the record in reverse, accumulating gradients.
// A tape is single-owner: never mutate it from two execution streams.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (a parameter or checked point).
  Var leaf(Tensor value);
  // Input that never receives a gradient (masks, fixed weights).
  Var constant(Tensor value);

  // Reverse sweep from a scalar root. The root gradient is seeded with 1.
  void backward(const Var& root);

  const Tensor& value(const Var& v) const { return node_value(v.id()); }
  // Accumulated gradient; the empty sentinel if the node was never reached.
  const Tensor& grad(const Var& v) const;
  // Moves the gradient out (zeros of the right shape if never reached).
  Tensor take_grad(const Var& v);

  std::size_t node_count() const noexcept { return nodes_.size(); }

  // --- op-implementation surface ---
  Var push(Tensor value, std::initializer_list<int> parents, Backprop backprop);
  const Tensor& node_value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool node_needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  // Mutable gradient buffer, allocated as zeros on first use; nullptr when
  // the node does not require a gradient.
  Tensor* grad_buffer(int id);
  void add_grad(int id, const Tensor& delta);

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched
    bool needs_grad = false;
    Backprop backprop;  // empty for leaves/constants
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- differentiable operations ----

// Matrix product over the two trailing dims; rank > 2 operands are treated as
// stacks of matrices with identical leading dims. Transpose flags apply to
// the trailing two dims.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

Var add(const Var& a, const Var& b);  // same shape

// x + y where y's shape is a trailing suffix of x's shape (bias rows, masks,
// positional tables). Gradient of y is the sum over the broadcast copies.
Var add_broadcast(const Var& x, const Var& y);

Var mul(const Var& a, const Var& b);  // elementwise, same shape
Var scale(const Var& x, double factor);

// Softmax over the last dim, computed with max-subtraction.
Var softmax_rows(const Var& x);

// Normalize each trailing slice to mean 0 / variance 1, then gain * x + bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// relu or tanh-approximated gelu, elementwise.
Var activation(const Var& x, ActivationKind kind);

// Mean negative log-softmax probability of targets, in nats per token.
// Logits' trailing dim is the class count; leading dims flatten to rows.
Var cross_entropy(const Var& logits, std::span<const std::int32_t> targets);

// Inverted dropout: zero each element w.p. rate and scale survivors by
// 1/(1-rate) during training; identity otherwise. rate must be < 1.
Var dropout(const Var& x, double rate, Rng& rng, bool training);

// Rows of `table` selected by ids; gradient scatter-adds into the table.
Var embedding_lookup(const Var& table, std::span<const std::int32_t> ids);

// Leading-dim slice [start, start+len).
Var narrow_rows(const Var& x, std::size_t start, std::size_t len);

Var reshape(const Var& x, std::vector<std::size_t> new_shape);

// Axis permutation; perm[i] names the source axis of output axis i.
Var permute(const Var& x, std::vector<std::size_t> perm);

Var sum(const Var& x);  // scalar

}  // namespace gpte
