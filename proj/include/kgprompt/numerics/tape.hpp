#pragma once
// Reverse-mode automatic differentiation over a linear record of operations.
//
// Every operation appends a node holding its forward value and an adjoint
// closure. backward() seeds the loss gradient and replays adjoints in exact
// reverse order of recording. Nodes that do not depend on any gradient
// source drop their adjoint at record time, so frozen weights cost nothing
// on the way back.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

#include "kgprompt/numerics/tensor.hpp"

namespace kgprompt::num {

template <std::floating_point T>
class Tape;

template <std::floating_point T>
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <std::floating_point T>
class Tape {
 public:
  // Called with the tape and the node's own id; reads grad_of(self) and
  // accumulates into the inputs' gradient buffers.
  using Adjoint = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) {
    return push(std::move(value), false, {}, nullptr, "constant");
  }

  // A leaf whose gradient is readable through grad() after backward().
  Var<T> input(Tensor<T> value) {
    return push(std::move(value), true, {}, nullptr, "input");
  }

  // Trainable parameters become gradient sources; frozen ones are constants.
  Var<T> parameter(Parameter<T>& p) {
    if (!p.trainable) return push(p.value, false, {}, nullptr, p.name);
    return push(p.value, true, {}, &p, p.name);
  }

  Var<T> parameter(const Parameter<T>& p) { return push(p.value, false, {}, nullptr, p.name); }

  Var<T> record(std::string_view op, Tensor<T> value, std::initializer_list<Var<T>> inputs,
                Adjoint adjoint) {
    return record(op, std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()),
                  std::move(adjoint));
  }

  Var<T> record(std::string_view op, Tensor<T> value, std::span<const Var<T>> inputs,
                Adjoint adjoint) {
    bool needs_grad = false;
    for (const auto& v : inputs) {
      if (v.tape_ != this) {
        throw std::invalid_argument(std::string(op) + ": input recorded on another tape");
      }
      needs_grad = needs_grad || nodes_[v.id_].requires_grad;
    }
    value.require_finite(op);
    return push(std::move(value), needs_grad, needs_grad ? std::move(adjoint) : Adjoint{},
                nullptr, op);
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Gradient buffer of a node, allocated as zeros on first touch.
  Tensor<T>& grad_of(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  const Tensor<T>& grad(const Var<T>& v) const {
    const Node& n = nodes_.at(v.id_);
    if (!n.requires_grad) {
      throw std::logic_error("grad() on node '" + n.label + "' that does not require grad");
    }
    if (n.grad.empty()) {
      // Not reached from the loss: zero gradient by definition.
      const_cast<Node&>(n).grad = Tensor<T>(n.value.shape());
    }
    return n.grad;
  }

  void backward(const Var<T>& loss, bool flush_to_parameters = true) {
    if (loss.tape_ != this) throw std::invalid_argument("backward: loss belongs to another tape");
    const Node& root = nodes_[loss.id_];
    if (root.value.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " +
                       shape_string(root.value.shape()));
    }
    if (!root.requires_grad) return;
    for (auto& n : nodes_) n.grad = Tensor<T>();
    grad_of(loss.id_).fill(T{1});
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !n.adjoint) continue;
      n.adjoint(*this, i);
    }
    if (flush_to_parameters) flush_parameter_grads();
  }

  // Adds leaf gradients into their Parameter::grad accumulators.
  void flush_parameter_grads() {
    for (auto& n : nodes_) {
      if (n.parameter == nullptr || n.grad.empty()) continue;
      auto dst = n.parameter->grad.values();
      auto src = n.grad.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Adjoint adjoint;
    Parameter<T>* parameter = nullptr;
    bool requires_grad = false;
    std::string label;
  };

  Var<T> push(Tensor<T> value, bool requires_grad, Adjoint adjoint, Parameter<T>* param,
              std::string_view label) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.adjoint = std::move(adjoint);
    n.parameter = param;
    n.label = std::string(label);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
};

}  // namespace kgprompt::num
