#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "geocon/tensor.hpp"

namespace geocon::nd {

class Tape;

/// Raised when a primitive produces NaN or Inf.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::string op, std::size_t tape_index);
  const std::string& op() const noexcept { return op_; }
  std::size_t tape_index() const noexcept { return tape_index_; }

 private:
  std::string op_;
  std::size_t tape_index_;
};

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::size_t index() const noexcept { return index_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

/// Reverse-mode recording of primitive operations. Entries are appended in
/// evaluation order, so every entry's inputs precede it and backward() walks
/// the list in reverse.
class Tape {
 public:
  /// Propagates the gradient stored at `self` into the entry's inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends a primitive's output. Throws NonFiniteError on NaN/Inf output.
  Var record(std::string_view op, Tensor value, const std::vector<Var>& inputs,
             BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every entry
  /// that requires them. Gradients accumulate across multiple uses.
  void backward(Var loss);

  const Tensor& value(std::size_t i) const { return nodes_.at(i).value; }
  /// Gradient of entry i; a zero tensor if nothing flowed into it.
  const Tensor& grad(std::size_t i) const;
  bool requires_grad(std::size_t i) const { return nodes_.at(i).requires_grad; }
  const std::string& op(std::size_t i) const { return nodes_.at(i).op; }

  /// Adds `delta` into the gradient of entry i (no-op when i needs no grad).
  void accumulate(std::size_t i, const Tensor& delta);
  /// Mutable gradient buffer for entry i, allocated on first use.
  Tensor& grad_buffer(std::size_t i);

  std::size_t size() const noexcept { return nodes_.size(); }

  void note(std::string message) { notes_.push_back(std::move(message)); }
  const std::vector<std::string>& notes() const noexcept { return notes_; }

 private:
  struct Node {
    std::string op;
    Tensor value;
    mutable Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owner(const Var& v) const;

  std::vector<Node> nodes_;
  std::vector<std::string> notes_;
};

}  // namespace geocon::nd
