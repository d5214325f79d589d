// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/autograd.hpp"

#include <stdexcept>

#include "nakul/errors.hpp"

namespace nakul {

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.requires_grad = record_gradients_;
  if (record_gradients_) n.param = &p;
  Var v = push(std::move(n));
  param_ids_.emplace(&p, v.id_);
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw std::logic_error("op mixes values from different tapes");
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw std::logic_error("op mixes values from different tapes");
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Tape::grad(const Var& v) {
  Node& n = nodes_[v.id_];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

GradientMap Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw std::logic_error("loss is not on this tape");
  if (value(loss).size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + to_string(value(loss).shape()));
  }
  if (!nodes_[loss.id_].requires_grad) {
    throw std::logic_error("loss does not depend on any differentiable value");
  }
  grad(loss).fill(1.0);
  GradientMap out;
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.param) {
      n.param->grad += n.grad;
      out.emplace(n.param, n.grad);
      continue;
    }
    if (n.backward) {
      n.backward(n.grad);
      // Interior gradients are not needed after propagation.
      n.grad = Tensor();
      n.backward = nullptr;
    }
  }
  for (auto& [p, id] : param_ids_) {
    if (!out.count(p)) out.emplace(p, Tensor(p->value.shape()));
  }
  return out;
}

Tensor Tape::leaf_grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

}  // namespace nakul
