#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "geocon/tape.hpp"

namespace geocon::nd {

enum class Aggregation { Mean, Sum, Max };

/// Neighbor lists for the nodes of one graph. Lists are kept sorted
/// ascending so max-aggregation tie-breaking is well defined.
struct Adjacency {
  std::size_t nodes = 0;
  std::vector<std::vector<std::size_t>> neighbors;

  static Adjacency from_edges(std::size_t nodes,
                              const std::vector<std::pair<std::size_t, std::size_t>>& edges);
  std::size_t isolated_count() const;
};

// Matrix primitives. Every op validates shapes and throws ShapeError with the
// primitive name and both shapes on mismatch.

Var matmul(Var a, Var b);
/// a + b for equal shapes, or a (r x c) + b (1 x c) broadcast over rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise (Hadamard) product.
Var mul(Var a, Var b);
/// alpha * a + beta, elementwise.
Var affine(Var a, double alpha, double beta);
/// Column-wise concatenation of two matrices with equal row counts.
Var concat(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);

/// Inverted dropout: kept entries (mask == 1) are divided by (1 - rate).
Var dropout(Var a, const Tensor& mask, double rate);
/// Bernoulli keep-mask with P(keep) = 1 - rate.
Tensor sample_dropout_mask(const Shape& shape, double rate, std::mt19937_64& rng);

/// For each node v, AGG over {h_u : u in N(v)}. `h` may stack several
/// copies of the graph: rows are interpreted as blocks of adj.nodes rows.
/// Isolated nodes receive a zero vector; for Max this is also noted on the tape.
Var neighbor_aggregate(Var h, const Adjacency& adj, Aggregation agg);

/// Mean squared error over all entries; returns a 1x1 tensor.
Var mse_loss(Var pred, const Tensor& target);

/// Sum of all entries; returns a 1x1 tensor.
Var sum(Var a);

}  // namespace geocon::nd
