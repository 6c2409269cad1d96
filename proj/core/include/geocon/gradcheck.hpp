#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "geocon/tape.hpp"

namespace geocon::nd {

/// A scalar-valued function of several parameter tensors, built on `tape`.
/// Must be deterministic (no dropout sampling between calls).
using TapeFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Compares reverse-mode gradients with central differences
/// (f(x+eps) - f(x-eps)) / 2eps on every coordinate of every parameter.
/// Relative error is |a - n| / max(|a|, |n|, floor); `floor` keeps
/// coordinates whose true gradient is ~0 from dominating the report.
GradCheckReport grad_check(const TapeFunction& f, const std::vector<Tensor>& point,
                           double eps = 1e-5, double rtol = 1e-4, double floor = 1e-6);

}  // namespace geocon::nd
