#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "geocon/graphs.hpp"
#include "geocon/ops.hpp"
#include "geocon/snapshot.hpp"
#include "geocon/tape.hpp"

namespace geocon {

class ModelError : public Error {
 public:
  using Error::Error;
};

enum class ModelKind { Lstm, Rgc };
enum class Activation { Sigmoid, Relu };

std::string to_string(ModelKind kind);
std::string to_string(nd::Aggregation agg);
std::string to_string(Activation act);
ModelKind parse_model_kind(const std::string& text);
nd::Aggregation parse_aggregation(const std::string& text);
Activation parse_activation(const std::string& text);

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::Rgc;
  nd::Aggregation aggregator = nd::Aggregation::Mean;  // rgc only
  std::size_t nlayers = 1;                             // graph-conv layers, 1 or 2
  std::size_t hidden_dim = 128;
  Activation gate_activation = Activation::Sigmoid;  // phi in the gate equations
  Activation conv_activation = Activation::Relu;     // sigma in the graph conv
  double dropout = 0.5;
  std::size_t lags = 5;     // h
  std::size_t horizon = 15; // omega
  std::size_t output_nodes = 0;
  std::size_t input_features = 0;
  /// Conventional GRU (gates read the previous recurrent state, b_q inside
  /// tanh, blended state carried forward) instead of the literal variant.
  bool standard_gru = false;

  /// Throws ModelError on an inconsistent spec.
  void validate() const;
};

/// Weights: uniform in +-1/sqrt(fan_in) (fan_in = weight rows); biases zero.
/// Each tensor draws from its own named stream so that shapes added to one
/// tensor do not shift the draws of any other.
ParamSet init_params(const ModelSpec& spec, std::uint64_t seed);
/// Expected parameter names and shapes for `spec`.
std::vector<std::pair<std::string, Shape>> param_layout(const ModelSpec& spec);

/// Parameters recorded on a tape as leaves.
class BoundParams {
 public:
  BoundParams(nd::Tape& tape, const ParamSet& params, bool requires_grad);
  /// Binds existing tape variables under the given names (e.g. for gradient checks).
  BoundParams(const std::vector<std::string>& names, std::span<const nd::Var> vars);
  nd::Var operator[](const std::string& name) const;
  const std::vector<std::pair<std::string, nd::Var>>& vars() const { return vars_; }

 private:
  std::vector<std::pair<std::string, nd::Var>> vars_;
};

/// Per-timestep intermediates, filled when requested.
struct ForwardState {
  std::vector<Tensor> embeddings;  // H_t
  std::vector<Tensor> update_gate; // Z_t
  std::vector<Tensor> reset_gate;  // R_t
  std::vector<Tensor> candidate;   // Q^_t
  std::vector<Tensor> blended;     // Q~_t
};

struct ForwardOptions {
  std::mt19937_64* dropout_rng = nullptr;  // null: dropout disabled
  ForwardState* trace = nullptr;
};

/// h^(0) = relu(X W_in + b_in); per layer:
/// h^(l) = sigma(CONCAT(AGG_{u in N(v)} h^(l-1)_u, h^(l-1)_v) W_g^(l)).
/// Readout is the identity (node embeddings stay per node). `x` may stack
/// several samples as consecutive blocks of adj.nodes rows.
nd::Var graph_conv(nd::Var x, const nd::Adjacency& adj, const BoundParams& params,
                   const ModelSpec& spec);

struct GruStep {
  nd::Var blended;    // Q~_t
  nd::Var candidate;  // Q^_t
  nd::Var update_gate;
  nd::Var reset_gate;
};

/// Literal form:
///   Z = phi(W_z [H_{t-1}, H_t] + b_z)
///   R = phi(W_r [H_{t-1}, H_t] + b_r)
///   Q^_t = tanh(W_q [R * Q^_{t-1}, H_t]) + b_q
///   Q~_t = Z * Q^_{t-1} + (1 - Z) * Q^_t
/// With spec.standard_gru, `state_prev` replaces H_{t-1} in the gates,
/// b_q moves inside tanh, and `h_prev` is ignored.
GruStep gru_step(nd::Var h_prev, nd::Var h_t, nd::Var state_prev, const BoundParams& params,
                 const ModelSpec& spec);

/// Batched forward pass. `steps` holds spec.lags matrices of shape
/// (B*N) x F (oldest first); the result is (B*N) x omega.
nd::Var forward_batch(nd::Tape& tape, const std::vector<Tensor>& steps, const nd::Adjacency* adj,
                      const BoundParams& params, const ModelSpec& spec,
                      const ForwardOptions& options = {});

/// Single-window forecasts: window is h x N x F, result omega x N.
Tensor rgc_forward(const Tensor& window, const nd::Adjacency& adj, const ParamSet& params,
                   const ModelSpec& spec, const ForwardOptions& options = {});
Tensor lstm_forward(const Tensor& window, const ParamSet& params, const ModelSpec& spec,
                    const ForwardOptions& options = {});

/// Splits an h x N x F window into per-timestep N x F matrices.
std::vector<Tensor> window_steps(const Tensor& window);

struct EnsembleConfig {
  GraphKind graph_kind = GraphKind::Socioeconomic;
  std::size_t members = 8;
  std::size_t hidden_dim = 128;
  double dropout = 0.5;
  std::size_t lags = 5;
  std::size_t horizon = 15;
  bool standard_gru = false;
  /// When non-empty, replaces the default roster (members is then ignored).
  std::vector<ModelSpec> roster;
};

/// Default roster, in order: lstm, rgc_mean_l1, rgc_mean_l2, rgc_sum_l1,
/// rgc_sum_l2, rgc_max_l1, rgc_max_l2, rgc_mean_l2_relugate. `members`
/// takes a prefix. Duplicate names throw ModelError.
std::vector<ModelSpec> make_ensemble(const EnsembleConfig& config);

}  // namespace geocon
