#include "ocgec/numerics/tape.hpp"

#include <string>
#include <utility>

#include "ocgec/error.hpp"

namespace ocgec::numerics {

const Tensor& Var::value() const { return tape_->value(*this); }

bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Tape::Node& Tape::node(Var v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw SpecError("variable belongs to another tape");
  return nodes_[v.id_];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw SpecError("variable belongs to another tape");
  return nodes_[v.id_];
}

Tensor& Tape::ensure_grad(Node& n) {
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    const Node& src = node(in);
    n.inputs.push_back(in.id_);
    n.requires_grad = n.requires_grad || src.requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  else n.inputs.clear();
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

void Tape::backward(Var output) {
  if (value(output).size() != 1) {
    throw DimensionError("backward() without a seed needs a one-element output, got " +
                         to_string(value(output).shape()));
  }
  backward(output, Tensor(value(output).shape(), 1.0));
}

void Tape::backward(Var output, Tensor seed) {
  Node& out = node(output);
  require_same_shape(out.value, seed, "backward seed");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (!out.requires_grad) return;
  out.grad = std::move(seed);
  out.has_grad = true;

  std::vector<Tensor*> grad_in;
  for (std::size_t id = output.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    grad_in.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      Node& src = nodes_[n.inputs[k]];
      if (src.requires_grad) grad_in[k] = &ensure_grad(src);
    }
    n.backward(n.grad, grad_in);
  }
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

}  // namespace ocgec::numerics
