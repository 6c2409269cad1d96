#include "geocon/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace geocon::nd {
namespace {

double evaluate(const TapeFunction& f, const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(point.size());
  for (const Tensor& p : point) vars.push_back(tape.leaf(p, false));
  return f(tape, vars).value().item();
}

}  // namespace

GradCheckReport grad_check(const TapeFunction& f, const std::vector<Tensor>& point,
                           double eps, double rtol, double floor) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : point) vars.push_back(tape.leaf(p, true));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }

  GradCheckReport report;
  std::vector<Tensor> probe = point;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double original = probe[p][i];
      probe[p][i] = original + eps;
      const double up = evaluate(f, probe);
      probe[p][i] = original - eps;
      const double down = evaluate(f, probe);
      probe[p][i] = original;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p][i];
      const double scale = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / scale;
      ++report.coordinates;
      if (rel >= report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_param = p;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < rtol;
  return report;
}

}  // namespace geocon::nd
