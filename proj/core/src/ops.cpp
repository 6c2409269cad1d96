#include "geocon/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace geocon::nd {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

ConstMatMap view(const Tensor& t) {
  return ConstMatMap(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MatMap view(Tensor& t) {
  return MatMap(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw Error("operands recorded on different tapes");
  return t;
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                   " and " + shape_string(b.shape()));
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(const char* name, Var a, Fwd fwd, Deriv deriv_from_output) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  const std::size_t ia = a.index();
  return tape.record(name, std::move(out), {a},
                     [ia, deriv_from_output](Tape& t, std::size_t self) {
                       const Tensor& y = t.value(self);
                       const Tensor& gy = t.grad(self);
                       Tensor gx(y.shape());
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         gx[i] = gy[i] * deriv_from_output(y[i], t.value(ia)[i]);
                       }
                       t.accumulate(ia, gx);
                     });
}

}  // namespace

Adjacency Adjacency::from_edges(std::size_t nodes,
                                const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  Adjacency adj;
  adj.nodes = nodes;
  adj.neighbors.assign(nodes, {});
  for (auto [u, v] : edges) {
    if (u >= nodes || v >= nodes) throw Error("edge endpoint out of range");
    if (u == v) continue;
    adj.neighbors[u].push_back(v);
    adj.neighbors[v].push_back(u);
  }
  for (auto& list : adj.neighbors) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

std::size_t Adjacency::isolated_count() const {
  return static_cast<std::size_t>(
      std::count_if(neighbors.begin(), neighbors.end(), [](const auto& l) { return l.empty(); }));
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  require_matrix("matmul", x);
  require_matrix("matmul", w);
  if (x.cols() != w.rows()) mismatch("matmul", x, w);
  Tensor out = Tensor::matrix(x.rows(), w.cols());
  view(out).noalias() = view(x) * view(w);
  const std::size_t ia = a.index();
  const std::size_t ib = b.index();
  return tape.record("matmul", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      view(ga).noalias() += view(gy) * view(t.value(ib)).transpose();
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      view(gb).noalias() += view(t.value(ia)).transpose() * view(gy);
    }
  });
}

namespace {

Var add_or_sub(const char* name, Var a, Var b, double sign) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const bool same = x.shape() == y.shape();
  const bool row_broadcast = !same && x.rank() == 2 && y.rank() == 2 && y.rows() == 1 &&
                             y.cols() == x.cols();
  if (!same && !row_broadcast) mismatch(name, x, y);
  Tensor out = x;
  if (same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * y[i];
  } else {
    const std::size_t c = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t j = 0; j < c; ++j) out(r, j) += sign * y[j];
    }
  }
  const std::size_t ia = a.index();
  const std::size_t ib = b.index();
  return tape.record(name, std::move(out), {a, b},
                     [ia, ib, same, sign](Tape& t, std::size_t self) {
                       const Tensor& gy = t.grad(self);
                       t.accumulate(ia, gy);
                       if (!t.requires_grad(ib)) return;
                       Tensor& gb = t.grad_buffer(ib);
                       if (same) {
                         for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += sign * gy[i];
                       } else {
                         const std::size_t c = gy.cols();
                         for (std::size_t r = 0; r < gy.rows(); ++r) {
                           for (std::size_t j = 0; j < c; ++j) gb[j] += sign * gy(r, j);
                         }
                       }
                     });
}

}  // namespace

Var add(Var a, Var b) { return add_or_sub("add", a, b, 1.0); }
Var sub(Var a, Var b) { return add_or_sub("sub", a, b, -1.0); }

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) mismatch("mul", x, y);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const std::size_t ia = a.index();
  const std::size_t ib = b.index();
  return tape.record("mul", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      const Tensor& yv = t.value(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * yv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const Tensor& xv = t.value(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * xv[i];
    }
  });
}

Var affine(Var a, double alpha, double beta) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i] + beta;
  const std::size_t ia = a.index();
  return tape.record("affine", std::move(out), {a}, [ia, alpha](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += alpha * gy[i];
  });
}

Var concat(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix("concat", x);
  require_matrix("concat", y);
  if (x.rows() != y.rows()) mismatch("concat", x, y);
  const std::size_t rows = x.rows();
  const std::size_t cx = x.cols();
  const std::size_t cy = y.cols();
  Tensor out = Tensor::matrix(rows, cx + cy);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&x.values()[r * cx], cx, &out.values()[r * (cx + cy)]);
    std::copy_n(&y.values()[r * cy], cy, &out.values()[r * (cx + cy) + cx]);
  }
  const std::size_t ia = a.index();
  const std::size_t ib = b.index();
  return tape.record("concat", std::move(out), {a, b},
                     [ia, ib, rows, cx, cy](Tape& t, std::size_t self) {
                       const Tensor& gy = t.grad(self);
                       const std::size_t c = cx + cy;
                       if (t.requires_grad(ia)) {
                         Tensor& ga = t.grad_buffer(ia);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < cx; ++j) ga(r, j) += gy[r * c + j];
                       }
                       if (t.requires_grad(ib)) {
                         Tensor& gb = t.grad_buffer(ib);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < cy; ++j) gb(r, j) += gy[r * c + cx + j];
                       }
                     });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        // Split on sign so exp() never overflows.
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double y, double) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double y, double) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sample_dropout_mask(const Shape& shape, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must lie in [0, 1)");
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  std::bernoulli_distribution keep(1.0 - rate);
  for (double& m : mask.values()) m = keep(rng) ? 1.0 : 0.0;
  return mask;
}

Var dropout(Var a, const Tensor& mask, double rate) {
  Tape& tape = tape_of(a);
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must lie in [0, 1)");
  const Tensor& x = a.value();
  if (mask.shape() != x.shape()) mismatch("dropout", x, mask);
  if (rate == 0.0) return a;
  const double scale = 1.0 / (1.0 - rate);
  Tensor factor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) factor[i] = mask[i] * scale;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor[i];
  const std::size_t ia = a.index();
  return tape.record("dropout", std::move(out), {a},
                     [ia, factor = std::move(factor)](Tape& t, std::size_t self) {
                       const Tensor& gy = t.grad(self);
                       Tensor& ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * factor[i];
                     });
}

Var neighbor_aggregate(Var h, const Adjacency& adj, Aggregation agg) {
  Tape& tape = tape_of(h);
  const Tensor& x = h.value();
  require_matrix("neighbor_aggregate", x);
  const std::size_t n = adj.nodes;
  if (n == 0 || x.rows() % n != 0) {
    throw ShapeError("neighbor_aggregate: " + std::to_string(x.rows()) +
                     " rows is not a multiple of the graph's " + std::to_string(n) + " nodes");
  }
  const std::size_t blocks = x.rows() / n;
  const std::size_t d = x.cols();
  Tensor out = Tensor::matrix(x.rows(), d);
  // For Max: the row that supplied each output entry (or npos when isolated).
  std::vector<std::size_t> argmax;
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  if (agg == Aggregation::Max) argmax.assign(out.size(), npos);

  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t base = b * n;
    for (std::size_t v = 0; v < n; ++v) {
      const auto& nbrs = adj.neighbors[v];
      if (nbrs.empty()) continue;
      double* dst = &out.values()[(base + v) * d];
      if (agg == Aggregation::Max) {
        std::size_t* arg = &argmax[(base + v) * d];
        for (std::size_t j = 0; j < d; ++j) {
          std::size_t best = base + nbrs.front();
          double best_val = x(best, j);
          for (std::size_t k = 1; k < nbrs.size(); ++k) {
            const double val = x(base + nbrs[k], j);
            if (val > best_val) {
              best_val = val;
              best = base + nbrs[k];
            }
          }
          dst[j] = best_val;
          arg[j] = best;
        }
      } else {
        for (std::size_t u : nbrs) {
          const double* src = &x.values()[(base + u) * d];
          for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        if (agg == Aggregation::Mean) {
          const double inv = 1.0 / static_cast<double>(nbrs.size());
          for (std::size_t j = 0; j < d; ++j) dst[j] *= inv;
        }
      }
    }
  }

  if (agg == Aggregation::Max && adj.isolated_count() > 0) {
    tape.note("neighbor_aggregate(max): " + std::to_string(adj.isolated_count()) +
              " isolated node(s) mapped to zero");
  }

  const std::size_t ih = h.index();
  return tape.record(
      "neighbor_aggregate", std::move(out), {h},
      [ih, adj, agg, n, blocks, d, argmax = std::move(argmax)](Tape& t, std::size_t self) {
        const Tensor& gy = t.grad(self);
        Tensor& gx = t.grad_buffer(ih);
        if (agg == Aggregation::Max) {
          for (std::size_t i = 0; i < gy.size(); ++i) {
            if (argmax[i] == npos) continue;
            gx(argmax[i], i % d) += gy[i];
          }
          return;
        }
        for (std::size_t b = 0; b < blocks; ++b) {
          const std::size_t base = b * n;
          for (std::size_t v = 0; v < n; ++v) {
            const auto& nbrs = adj.neighbors[v];
            if (nbrs.empty()) continue;
            const double w =
                agg == Aggregation::Mean ? 1.0 / static_cast<double>(nbrs.size()) : 1.0;
            const double* src = &gy.values()[(base + v) * d];
            for (std::size_t u : nbrs) {
              double* dst = &gx.values()[(base + u) * d];
              for (std::size_t j = 0; j < d; ++j) dst[j] += w * src[j];
            }
          }
        }
      });
}

Var mse_loss(Var pred, const Tensor& target) {
  Tape& tape = tape_of(pred);
  const Tensor& p = pred.value();
  if (p.shape() != target.shape()) mismatch("mse_loss", p, target);
  if (p.empty()) throw ShapeError("mse_loss: empty prediction");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - target[i];
    acc += e * e;
  }
  const double count = static_cast<double>(p.size());
  const std::size_t ip = pred.index();
  return tape.record("mse_loss", Tensor::scalar(acc / count), {pred},
                     [ip, target, count](Tape& t, std::size_t self) {
                       const double g = t.grad(self)[0];
                       const Tensor& pv = t.value(ip);
                       Tensor& gp = t.grad_buffer(ip);
                       for (std::size_t i = 0; i < pv.size(); ++i) {
                         gp[i] += g * 2.0 * (pv[i] - target[i]) / count;
                       }
                     });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  const std::size_t ia = a.index();
  return tape.record("sum", Tensor::scalar(acc), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& ga = t.grad_buffer(ia);
    for (double& v : ga.values()) v += g;
  });
}

}  // namespace geocon::nd
