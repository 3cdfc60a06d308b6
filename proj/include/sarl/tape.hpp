#ifndef SARL_TAPE_HPP_
#define SARL_TAPE_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "sarl/tensor.hpp"

namespace sarl {

template <typename Scalar>
class Tape;

using NodeId = std::size_t;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<Scalar>& value() const { return tape_->value(id_); }
  const Tensor<Scalar>& grad() const { return tape_->grad(id_); }
  const Shape& shape() const { return value().shape(); }
  Index size() const { return value().size(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  NodeId id_ = 0;
};

/**
 * Single-owner record of primitive operations. Nodes are appended in
 * evaluation order, so every parent has a smaller id than its children and a
 * reverse sweep over ids is a valid topological replay.
 */
template <typename Scalar>
class Tape {
 public:
  using TensorT = Tensor<Scalar>;
  using BackwardFn = std::function<void(Tape&, const TensorT& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable input; receives a gradient on backward().
  Var<Scalar> leaf(TensorT value) { return push(std::move(value), true, nullptr); }

  /// Input that never receives a gradient (labels, masks, frozen data).
  Var<Scalar> constant(TensorT value) { return push(std::move(value), false, nullptr); }

  Var<Scalar> record(TensorT value, std::initializer_list<Var<Scalar>> parents, BackwardFn backward) {
    bool needs = false;
    for (const auto& p : parents) {
      if (&p.tape() != this) throw ContractError("operands recorded on different tapes");
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  Var<Scalar> record(TensorT value, const std::vector<Var<Scalar>>& parents, BackwardFn backward) {
    bool needs = false;
    for (const auto& p : parents) {
      if (&p.tape() != this) throw ContractError("operands recorded on different tapes");
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  const TensorT& value(NodeId id) const { return nodes_.at(id).value; }

  /// Gradient accumulated by the last backward(); zeros if the node was not reached.
  const TensorT& grad(NodeId id) const {
    const Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = TensorT(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into the gradient of node `id`. No-op for constants.
  template <typename Derived>
  void accumulate(NodeId id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (g.size() != n.value.size()) {
      throw DimensionError("gradient of size " + std::to_string(g.size()) + " for node of shape " +
                           shape_string(n.value.shape()));
    }
    if (!n.has_grad) {
      n.grad = TensorT(n.value.shape());
      n.has_grad = true;
    }
    n.grad.data() += g;
  }

  void accumulate(NodeId id, const TensorT& g) { accumulate(id, g.data()); }

  void backward(const Var<Scalar>& loss) {
    if (&loss.tape() != this) throw ContractError("loss was recorded on a different tape");
    if (loss.value().size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    for (auto& n : nodes_) {
      n.grad = TensorT();
      n.has_grad = false;
    }
    Node& root = nodes_[loss.id()];
    root.grad = TensorT(root.value.shape(), Scalar(1));
    root.has_grad = true;
    for (NodeId i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.has_grad && n.backward) n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    TensorT value;
    mutable TensorT grad;
    bool requires_grad = false;
    mutable bool has_grad = false;
    BackwardFn backward;
  };

  Var<Scalar> push(TensorT value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), TensorT(), requires_grad, false, std::move(backward)});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;  // push_back keeps references to existing nodes valid
};

}  // namespace sarl

#endif  // SARL_TAPE_HPP_
