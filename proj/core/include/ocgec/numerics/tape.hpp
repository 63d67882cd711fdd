#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "ocgec/numerics/tensor.hpp"

namespace ocgec::numerics {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Accumulates d(output)/d(input_k) into grad_in[k]. Entries of grad_in are
/// null for inputs that do not require a gradient.
using BackwardFn =
    std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

/// Reverse-mode gradient tape. Operations are appended in evaluation order and
/// backward() replays them in exact reverse order. A tape is confined to one
/// thread; use one tape per worker.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf (a parameter or an input being checked).
  Var variable(Tensor value);
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);

  /// Records an operation result. When no input requires a gradient the
  /// backward function is dropped and the result is treated as a constant.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  /// Seeds d(output)/d(output) = 1 for a one-element output.
  void backward(Var output);
  void backward(Var output, Tensor seed);

  const Tensor& value(Var v) const;
  /// Adjoint of v after backward(); zeros when v did not influence the output.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& ensure_grad(Node& n);

  std::deque<Node> nodes_;
};

}  // namespace ocgec::numerics
