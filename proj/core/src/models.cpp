#include "geocon/models.hpp"

#include <cmath>
#include <set>

#include "geocon/rng.hpp"

namespace geocon {
namespace {

nd::Var activate(nd::Var x, Activation act) {
  return act == Activation::Sigmoid ? nd::sigmoid(x) : nd::relu(x);
}

nd::Var dense(nd::Var x, nd::Var w, nd::Var b) { return nd::add(nd::matmul(x, w), b); }

nd::Var head(nd::Var state, const BoundParams& p, const ModelSpec& spec,
             const ForwardOptions& options) {
  nd::Var s = state;
  if (options.dropout_rng && spec.dropout > 0.0) {
    const Tensor mask = nd::sample_dropout_mask(state.shape(), spec.dropout, *options.dropout_rng);
    s = nd::dropout(state, mask, spec.dropout);
  }
  return dense(s, p["head.weight"], p["head.bias"]);
}

std::size_t batch_rows(const std::vector<Tensor>& steps, const ModelSpec& spec) {
  if (steps.size() != spec.lags) {
    throw ModelError(spec.name + ": window has " + std::to_string(steps.size()) +
                     " timesteps, spec expects " + std::to_string(spec.lags));
  }
  const std::size_t rows = steps.front().rows();
  for (const Tensor& s : steps) {
    if (s.rows() != rows || s.cols() != spec.input_features) {
      throw ModelError(spec.name + ": step shape " + shape_string(s.shape()) +
                       " does not match " + std::to_string(spec.input_features) + " features");
    }
  }
  return rows;
}

nd::Var rgc_batch(nd::Tape& tape, const std::vector<Tensor>& steps, const nd::Adjacency& adj,
                  const BoundParams& p, const ModelSpec& spec, const ForwardOptions& options) {
  const std::size_t rows = batch_rows(steps, spec);
  if (adj.nodes != spec.output_nodes || rows % adj.nodes != 0) {
    throw ModelError(spec.name + ": graph has " + std::to_string(adj.nodes) +
                     " nodes; spec expects " + std::to_string(spec.output_nodes) + " (rows " +
                     std::to_string(rows) + ")");
  }
  // Literal form carries Q^ between steps; the standard form carries the blend.
  nd::Var carried = tape.constant(Tensor::matrix(rows, spec.hidden_dim));
  nd::Var h_prev;
  nd::Var output;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    try {
      nd::Var x = tape.constant(steps[t]);
      nd::Var h_t = graph_conv(x, adj, p, spec);
      if (!h_prev.valid()) h_prev = h_t;  // H_0 := H_1
      GruStep g = gru_step(h_prev, h_t, carried, p, spec);
      carried = spec.standard_gru ? g.blended : g.candidate;
      h_prev = h_t;
      output = g.blended;
      if (options.trace) {
        options.trace->embeddings.push_back(h_t.value());
        options.trace->update_gate.push_back(g.update_gate.value());
        options.trace->reset_gate.push_back(g.reset_gate.value());
        options.trace->candidate.push_back(g.candidate.value());
        options.trace->blended.push_back(g.blended.value());
      }
    } catch (const nd::NonFiniteError& e) {
      throw ModelError(spec.name + ": non-finite value at timestep " + std::to_string(t) + " (" +
                       e.what() + ")");
    }
  }
  return head(output, p, spec, options);
}

nd::Var lstm_batch(nd::Tape& tape, const std::vector<Tensor>& steps, const BoundParams& p,
                   const ModelSpec& spec, const ForwardOptions& options) {
  const std::size_t rows = batch_rows(steps, spec);
  nd::Var h = tape.constant(Tensor::matrix(rows, spec.hidden_dim));
  nd::Var c = tape.constant(Tensor::matrix(rows, spec.hidden_dim));
  for (std::size_t t = 0; t < steps.size(); ++t) {
    try {
      nd::Var xh = nd::concat(h, tape.constant(steps[t]));
      nd::Var in = nd::sigmoid(dense(xh, p["lstm.w_i"], p["lstm.b_i"]));
      nd::Var forget = nd::sigmoid(dense(xh, p["lstm.w_f"], p["lstm.b_f"]));
      nd::Var out = nd::sigmoid(dense(xh, p["lstm.w_o"], p["lstm.b_o"]));
      nd::Var cand = nd::tanh(dense(xh, p["lstm.w_c"], p["lstm.b_c"]));
      c = nd::add(nd::mul(forget, c), nd::mul(in, cand));
      h = nd::mul(out, nd::tanh(c));
    } catch (const nd::NonFiniteError& e) {
      throw ModelError(spec.name + ": non-finite value at timestep " + std::to_string(t) + " (" +
                       e.what() + ")");
    }
  }
  return head(h, p, spec, options);
}

Tensor to_forecast(const Tensor& rows_by_horizon) {
  // (N x omega) -> (omega x N)
  return rows_by_horizon.transposed();
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::Lstm ? "lstm" : "rgc"; }

std::string to_string(nd::Aggregation agg) {
  switch (agg) {
    case nd::Aggregation::Mean: return "mean";
    case nd::Aggregation::Sum: return "sum";
    case nd::Aggregation::Max: return "max";
  }
  return "?";
}

std::string to_string(Activation act) { return act == Activation::Sigmoid ? "sigmoid" : "relu"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "lstm") return ModelKind::Lstm;
  if (text == "rgc") return ModelKind::Rgc;
  throw ModelError("unknown model kind '" + text + "'");
}

nd::Aggregation parse_aggregation(const std::string& text) {
  if (text == "mean") return nd::Aggregation::Mean;
  if (text == "sum") return nd::Aggregation::Sum;
  if (text == "max") return nd::Aggregation::Max;
  throw ModelError("unknown aggregator '" + text + "'");
}

Activation parse_activation(const std::string& text) {
  if (text == "sigmoid") return Activation::Sigmoid;
  if (text == "relu") return Activation::Relu;
  throw ModelError("unknown activation '" + text + "'");
}

void ModelSpec::validate() const {
  const auto fail = [&](const std::string& why) {
    throw ModelError("model '" + name + "': " + why);
  };
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (lags < 1) fail("lags must be >= 1");
  if (horizon < 1) fail("horizon must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  if (kind == ModelKind::Rgc && (nlayers < 1 || nlayers > 2)) fail("nlayers must be 1 or 2");
  if (input_features < 1) fail("input_features must be >= 1");
  if (output_nodes < 1) fail("output_nodes must be >= 1");
}

std::vector<std::pair<std::string, Shape>> param_layout(const ModelSpec& spec) {
  const std::size_t H = spec.hidden_dim;
  const std::size_t F = spec.input_features;
  std::vector<std::pair<std::string, Shape>> layout;
  if (spec.kind == ModelKind::Rgc) {
    layout.push_back({"embed.weight", {F, H}});
    layout.push_back({"embed.bias", {1, H}});
    for (std::size_t l = 0; l < spec.nlayers; ++l) {
      layout.push_back({"conv." + std::to_string(l) + ".weight", {2 * H, H}});
    }
    for (const char* gate : {"z", "r", "q"}) {
      layout.push_back({std::string("gru.w_") + gate, {2 * H, H}});
      layout.push_back({std::string("gru.b_") + gate, {1, H}});
    }
  } else {
    for (const char* gate : {"i", "f", "o", "c"}) {
      layout.push_back({std::string("lstm.w_") + gate, {H + F, H}});
      layout.push_back({std::string("lstm.b_") + gate, {1, H}});
    }
  }
  layout.push_back({"head.weight", {H, spec.horizon}});
  layout.push_back({"head.bias", {1, spec.horizon}});
  return layout;
}

ParamSet init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const SeedSplitter splitter(seed);
  ParamSet params;
  for (auto& [name, shape] : param_layout(spec)) {
    Tensor t(shape, 0.0);
    if (name.find("bias") == std::string::npos && name.find(".b_") == std::string::npos) {
      auto rng = splitter.stream("init/" + name);
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.values()) v = dist(rng);
    }
    params.add(name, std::move(t));
  }
  return params;
}

BoundParams::BoundParams(nd::Tape& tape, const ParamSet& params, bool requires_grad) {
  for (const auto& [name, t] : params) vars_.emplace_back(name, tape.leaf(t, requires_grad));
}

BoundParams::BoundParams(const std::vector<std::string>& names, std::span<const nd::Var> vars) {
  if (names.size() != vars.size()) throw ModelError("parameter names and variables differ in count");
  for (std::size_t i = 0; i < names.size(); ++i) vars_.emplace_back(names[i], vars[i]);
}

nd::Var BoundParams::operator[](const std::string& name) const {
  for (const auto& [n, v] : vars_) {
    if (n == name) return v;
  }
  throw ModelError("parameter '" + name + "' not bound");
}

nd::Var graph_conv(nd::Var x, const nd::Adjacency& adj, const BoundParams& params,
                   const ModelSpec& spec) {
  nd::Var h = nd::relu(dense(x, params["embed.weight"], params["embed.bias"]));
  for (std::size_t l = 0; l < spec.nlayers; ++l) {
    nd::Var neigh = nd::neighbor_aggregate(h, adj, spec.aggregator);
    nd::Var joined = nd::concat(neigh, h);
    h = activate(nd::matmul(joined, params["conv." + std::to_string(l) + ".weight"]),
                 spec.conv_activation);
  }
  return h;
}

GruStep gru_step(nd::Var h_prev, nd::Var h_t, nd::Var state_prev, const BoundParams& params,
                 const ModelSpec& spec) {
  const nd::Var gate_input = spec.standard_gru ? state_prev : h_prev;
  nd::Var stacked = nd::concat(gate_input, h_t);
  nd::Var z = activate(dense(stacked, params["gru.w_z"], params["gru.b_z"]), spec.gate_activation);
  nd::Var r = activate(dense(stacked, params["gru.w_r"], params["gru.b_r"]), spec.gate_activation);
  nd::Var reset = nd::concat(nd::mul(r, state_prev), h_t);
  nd::Var candidate =
      spec.standard_gru
          ? nd::tanh(dense(reset, params["gru.w_q"], params["gru.b_q"]))
          : nd::add(nd::tanh(nd::matmul(reset, params["gru.w_q"])), params["gru.b_q"]);
  nd::Var blended =
      nd::add(nd::mul(z, state_prev), nd::mul(nd::affine(z, -1.0, 1.0), candidate));
  return {blended, candidate, z, r};
}

nd::Var forward_batch(nd::Tape& tape, const std::vector<Tensor>& steps, const nd::Adjacency* adj,
                      const BoundParams& params, const ModelSpec& spec,
                      const ForwardOptions& options) {
  if (spec.kind == ModelKind::Rgc) {
    if (!adj) throw ModelError(spec.name + ": rgc model needs a graph");
    return rgc_batch(tape, steps, *adj, params, spec, options);
  }
  return lstm_batch(tape, steps, params, spec, options);
}

std::vector<Tensor> window_steps(const Tensor& window) {
  if (window.rank() != 3) {
    throw ModelError("window must be h x N x F, got " + shape_string(window.shape()));
  }
  const std::size_t h = window.shape()[0];
  const std::size_t n = window.shape()[1];
  const std::size_t f = window.shape()[2];
  std::vector<Tensor> steps;
  for (std::size_t t = 0; t < h; ++t) {
    std::vector<double> slice(window.values().begin() + static_cast<std::ptrdiff_t>(t * n * f),
                              window.values().begin() + static_cast<std::ptrdiff_t>((t + 1) * n * f));
    steps.emplace_back(Shape{n, f}, std::move(slice));
  }
  return steps;
}

Tensor rgc_forward(const Tensor& window, const nd::Adjacency& adj, const ParamSet& params,
                   const ModelSpec& spec, const ForwardOptions& options) {
  if (spec.kind != ModelKind::Rgc) throw ModelError(spec.name + " is not an rgc model");
  nd::Tape tape;
  BoundParams bound(tape, params, false);
  return to_forecast(forward_batch(tape, window_steps(window), &adj, bound, spec, options).value());
}

Tensor lstm_forward(const Tensor& window, const ParamSet& params, const ModelSpec& spec,
                    const ForwardOptions& options) {
  if (spec.kind != ModelKind::Lstm) throw ModelError(spec.name + " is not an lstm model");
  nd::Tape tape;
  BoundParams bound(tape, params, false);
  return to_forecast(
      forward_batch(tape, window_steps(window), nullptr, bound, spec, options).value());
}

std::vector<ModelSpec> make_ensemble(const EnsembleConfig& config) {
  std::vector<ModelSpec> roster;
  if (!config.roster.empty()) {
    roster = config.roster;
  } else {
    const auto member = [&](std::string name, ModelKind kind, nd::Aggregation agg,
                            std::size_t layers, Activation gate) {
      ModelSpec s;
      s.name = std::move(name);
      s.kind = kind;
      s.aggregator = agg;
      s.nlayers = layers;
      s.gate_activation = gate;
      s.hidden_dim = config.hidden_dim;
      s.dropout = config.dropout;
      s.lags = config.lags;
      s.horizon = config.horizon;
      s.standard_gru = config.standard_gru;
      return s;
    };
    using nd::Aggregation;
    roster = {
        member("lstm", ModelKind::Lstm, Aggregation::Mean, 1, Activation::Sigmoid),
        member("rgc_mean_l1", ModelKind::Rgc, Aggregation::Mean, 1, Activation::Sigmoid),
        member("rgc_mean_l2", ModelKind::Rgc, Aggregation::Mean, 2, Activation::Sigmoid),
        member("rgc_sum_l1", ModelKind::Rgc, Aggregation::Sum, 1, Activation::Sigmoid),
        member("rgc_sum_l2", ModelKind::Rgc, Aggregation::Sum, 2, Activation::Sigmoid),
        member("rgc_max_l1", ModelKind::Rgc, Aggregation::Max, 1, Activation::Sigmoid),
        member("rgc_max_l2", ModelKind::Rgc, Aggregation::Max, 2, Activation::Sigmoid),
        member("rgc_mean_l2_relugate", ModelKind::Rgc, Aggregation::Mean, 2, Activation::Relu),
    };
    if (config.members < 1 || config.members > roster.size()) {
      throw ModelError("ensemble size must be between 1 and " + std::to_string(roster.size()));
    }
    roster.resize(config.members);
  }
  std::set<std::string> names;
  for (const auto& s : roster) {
    if (!names.insert(s.name).second) throw ModelError("duplicate ensemble member '" + s.name + "'");
  }
  return roster;
}

}  // namespace geocon
