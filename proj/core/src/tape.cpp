#include "geocon/tape.hpp"

namespace geocon::nd {

NonFiniteError::NonFiniteError(std::string op, std::size_t tape_index)
    : Error("non-finite output from '" + op + "' at tape entry " +
            std::to_string(tape_index)),
      op_(std::move(op)),
      tape_index_(tape_index) {}

const Tensor& Var::value() const {
  if (!tape_) throw Error("value() on an unbound Var");
  return tape_->value(index_);
}

const Tensor& Var::grad() const {
  if (!tape_) throw Error("grad() on an unbound Var");
  return tape_->grad(index_);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("leaf", nodes_.size());
  nodes_.push_back(Node{"leaf", std::move(value), Tensor{}, requires_grad, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, const std::vector<Var>& inputs,
                 BackwardFn backward) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    check_owner(in);
    needs_grad = needs_grad || nodes_[in.index()].requires_grad;
  }
  if (!value.all_finite()) throw NonFiniteError(std::string(op), nodes_.size());
  nodes_.push_back(Node{std::string(op), std::move(value), Tensor{}, needs_grad,
                        needs_grad ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owner(const Var& v) const {
  if (v.tape() != this || v.index() >= nodes_.size()) {
    throw Error("Var does not belong to this tape");
  }
}

const Tensor& Tape::grad(std::size_t i) const {
  const Node& n = nodes_.at(i);
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t i) {
  Node& n = nodes_.at(i);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::accumulate(std::size_t i, const Tensor& delta) {
  if (!nodes_.at(i).requires_grad) return;
  Tensor& g = grad_buffer(i);
  if (g.size() != delta.size()) {
    throw ShapeError("gradient shape " + shape_string(delta.shape()) +
                     " does not match value shape " + shape_string(g.shape()) +
                     " at tape entry " + std::to_string(i));
  }
  auto gv = g.values();
  auto dv = delta.values();
  for (std::size_t k = 0; k < gv.size(); ++k) gv[k] += dv[k];
}

void Tape::backward(Var loss) {
  check_owner(loss);
  const std::size_t root = loss.index();
  if (nodes_[root].value.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     shape_string(nodes_[root].value.shape()));
  }
  grad_buffer(root)[0] += 1.0;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

}  // namespace geocon::nd
