// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nakul/tensor.hpp"

namespace nakul {

/// Learnable tensor plus its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v);
  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape* tape() const noexcept { return tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

using GradientMap = std::unordered_map<const Parameter*, Tensor>;

/// Records primitive operations in execution order so a reverse sweep can
/// produce gradients. One tape per forward/backward pass; not thread-safe.
class Tape {
 public:
  /// Receives the gradient of the op output and adds into input gradients.
  using Backward = std::function<void(const Tensor& grad_out)>;

  /// With record_gradients = false parameters enter as constants and no
  /// backward closures are kept (inference).
  explicit Tape(bool record_gradients = true) : record_gradients_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Differentiable input that is not a Parameter (used for input gradients).
  Var leaf(Tensor value);
  /// The same Parameter always maps to the same leaf on a given tape.
  Var param(Parameter& p);

  /// Records an op output. `backward` is dropped when no input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, const std::vector<Var>& inputs, Backward backward);

  const Tensor& value(const Var& v) const { return nodes_[v.id_].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }

  /// Gradient buffer of `v`, zero-initialized on first access.
  Tensor& grad(const Var& v);

  /// Reverse sweep from a scalar loss. Gradients are added into each
  /// Parameter::grad and also returned. Throws ShapeError for a non-scalar
  /// loss and std::logic_error when no parameter or leaf reaches the loss.
  GradientMap backward(const Var& loss);

  /// Gradient of a leaf() after backward(); zeros if the loss ignores it.
  Tensor leaf_grad(const Var& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool records_gradients() const noexcept { return record_gradients_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_ids_;
  bool record_gradients_ = true;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }
inline bool Var::requires_grad() const { return tape_->requires_grad(*this); }

}  // namespace nakul
