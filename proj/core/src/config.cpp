#include "geocon/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "geocon/ingest.hpp"

namespace geocon {

namespace fs = std::filesystem;
using nlohmann::json;

std::string PipelineConfig::panel_variable(const std::string& raw) const {
  return per100k && is_clinical(raw) ? raw + vars::kPer100kSuffix : raw;
}

std::vector<std::string> PipelineConfig::baseline_variables() const {
  std::vector<std::string> out;
  for (const auto& v : baseline_features.empty() ? std::vector{target} : baseline_features) {
    out.push_back(panel_variable(v));
  }
  return out;
}

ExperimentConfig PipelineConfig::experiment(const std::string& factor, GraphKind kind) const {
  ExperimentConfig e;
  e.state = state;
  e.graph_kind = kind;
  e.target = target_variable();
  e.baseline_features = baseline_variables();
  e.factor = panel_variable(factor);
  e.ensemble = ensemble;
  e.ensemble.graph_kind = kind;
  e.runs = runs;
  e.epochs = epochs;
  e.optimizer = optimizer;
  e.seed = seed;
  e.jobs = jobs;
  return e;
}

namespace {

/// Typed field access that reports the dotted path on failure.
class Reader {
 public:
  Reader(const json& j, std::string file, std::string prefix)
      : j_(j), file_(std::move(file)), prefix_(std::move(prefix)) {
    if (!j_.is_object()) fail("", "expected a table");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(file_, path(key), msg);
  }
  std::string path(const std::string& key) const {
    if (prefix_.empty()) return key.empty() ? "<root>" : key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }
  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) const {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return as<T>(key);
  }
  template <class T>
  T require(const std::string& key) const {
    seen_.insert(key);
    if (!j_.contains(key)) fail(key, "missing required field");
    return as<T>(key);
  }
  Reader table(const std::string& key) const {
    seen_.insert(key);
    static const json empty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, file_, path(key));
  }
  void reject_unknown() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) fail(key, "unknown field");
    }
  }

 private:
  template <class T>
  T as(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, "wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

  const json& j_;
  std::string file_;
  std::string prefix_;
  mutable std::set<std::string> seen_;
};

Date date_field(const Reader& r, const std::string& key) {
  const auto text = r.require<std::string>(key);
  try {
    return parse_date(text);
  } catch (const Error& e) {
    r.fail(key, e.what());
  }
}

std::size_t positive(const Reader& r, const std::string& key, std::size_t fallback) {
  const auto v = r.get<std::int64_t>(key, static_cast<std::int64_t>(fallback));
  if (v < 1) r.fail(key, "must be >= 1");
  return static_cast<std::size_t>(v);
}

}  // namespace

PipelineConfig parse_config(const json& j, const fs::path& source) {
  const std::string file = source.string();
  const fs::path base = source.parent_path();
  const auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : base / p; };

  PipelineConfig c;
  c.source = source;
  const Reader root(j, file, "");
  c.state = root.require<std::string>("state");
  if (c.state.size() != 2 || !std::isdigit(static_cast<unsigned char>(c.state[0])) ||
      !std::isdigit(static_cast<unsigned char>(c.state[1]))) {
    root.fail("state", "expected a two-digit state code, got '" + c.state + "'");
  }

  const Reader in = root.table("inputs");
  c.series = resolve(in.require<std::string>("series"));
  c.adjacency = resolve(in.require<std::string>("adjacency"));
  c.socio = resolve(in.require<std::string>("socio"));
  in.reject_unknown();

  const Reader win = root.table("window");
  c.window.first = date_field(win, "start");
  c.window.last = date_field(win, "end");
  if (c.window.last < c.window.first) win.fail("end", "precedes start");
  win.reject_unknown();

  c.target = root.get<std::string>("target", c.target);
  c.per100k = root.get<bool>("per100k", c.per100k);
  c.baseline_features = root.get<std::vector<std::string>>("baseline_features", {});
  if (!c.baseline_features.empty() &&
      std::find(c.baseline_features.begin(), c.baseline_features.end(), c.target) ==
          c.baseline_features.end()) {
    root.fail("baseline_features", "must include the target '" + c.target + "'");
  }
  c.factors = root.require<std::vector<std::string>>("factors");
  if (c.factors.empty()) root.fail("factors", "needs at least one factor");
  for (const auto& f : c.factors) {
    if (f == c.target) root.fail("factors", "the target cannot be a factor");
  }

  const Reader graph = root.table("graph");
  if (graph.has("kinds")) {
    c.graph_kinds.clear();
    for (const auto& k : graph.require<std::vector<std::string>>("kinds")) {
      try {
        c.graph_kinds.push_back(parse_graph_kind(k));
      } catch (const Error& e) {
        graph.fail("kinds", e.what());
      }
    }
    if (c.graph_kinds.empty()) graph.fail("kinds", "needs at least one graph kind");
  }
  if (graph.has("top_k") && graph.has("threshold")) {
    graph.fail("threshold", "give either top_k or threshold, not both");
  }
  if (graph.has("threshold")) {
    const auto d = graph.require<double>("threshold");
    if (!(d >= 0.0)) graph.fail("threshold", "must be >= 0");
    c.socio_rule = Threshold{d};
  } else {
    c.socio_rule = TopK{positive(graph, "top_k", 4)};
  }
  const auto scaling = graph.get<std::string>("scaling", "zscore");
  if (scaling == "zscore") {
    c.socio_scaling = SocioScaling::ZScore;
  } else if (scaling == "none") {
    c.socio_scaling = SocioScaling::None;
  } else {
    graph.fail("scaling", "expected 'zscore' or 'none'");
  }
  graph.reject_unknown();

  const Reader model = root.table("model");
  c.ensemble.members = positive(model, "members", c.ensemble.members);
  c.ensemble.hidden_dim = positive(model, "hidden_dim", c.ensemble.hidden_dim);
  c.ensemble.dropout = model.get<double>("dropout", c.ensemble.dropout);
  if (!(c.ensemble.dropout >= 0.0 && c.ensemble.dropout < 1.0)) {
    model.fail("dropout", "must be in [0, 1)");
  }
  c.ensemble.lags = positive(model, "lags", c.ensemble.lags);
  c.ensemble.horizon = positive(model, "horizon", c.ensemble.horizon);
  c.ensemble.standard_gru = model.get<bool>("standard_gru", false);
  model.reject_unknown();
  try {
    make_ensemble(c.ensemble);
  } catch (const Error& e) {
    model.fail("members", e.what());
  }

  const Reader train = root.table("train");
  c.epochs = static_cast<std::size_t>(train.get<std::int64_t>("epochs", 150));
  c.runs = positive(train, "runs", c.runs);
  c.optimizer.lr = train.get<double>("lr", c.optimizer.lr);
  c.optimizer.beta1 = train.get<double>("beta1", c.optimizer.beta1);
  c.optimizer.beta2 = train.get<double>("beta2", c.optimizer.beta2);
  c.optimizer.eps = train.get<double>("eps", c.optimizer.eps);
  if (!(c.optimizer.lr > 0.0)) train.fail("lr", "must be > 0");
  c.seed = train.get<std::uint64_t>("seed", c.seed);
  c.jobs = positive(train, "jobs", c.jobs);
  train.reject_unknown();

  const Reader vote = root.table("vote");
  if (vote.has("alpha")) {
    const json& a = j.at("vote").at("alpha");
    c.alphas = a.is_array() ? vote.require<std::vector<double>>("alpha")
                            : std::vector<double>{vote.require<double>("alpha")};
  } else {
    vote.get<double>("alpha", 0.1);
  }
  if (c.alphas.empty()) vote.fail("alpha", "needs at least one level");
  for (double a : c.alphas) {
    if (!(a > 0.0 && a < 1.0)) vote.fail("alpha", "levels must lie in (0, 1)");
  }
  c.min_samples = positive(vote, "min_samples", c.min_samples);
  vote.reject_unknown();

  const Reader viz = root.table("viz");
  c.bins = viz.get<std::size_t>("bins", c.bins);
  if (c.bins < 2) viz.fail("bins", "must be >= 2");
  viz.reject_unknown();

  root.reject_unknown();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "<file>", "cannot open config");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), "<file>", e.what());
  }
  return parse_config(j, path);
}

json to_json(const PipelineConfig& c) {
  json graph = {{"kinds", json::array()},
                {"scaling", c.socio_scaling == SocioScaling::ZScore ? "zscore" : "none"}};
  for (GraphKind k : c.graph_kinds) graph["kinds"].push_back(to_string(k));
  if (const auto* t = std::get_if<TopK>(&c.socio_rule)) {
    graph["top_k"] = t->k;
  } else {
    graph["threshold"] = std::get<Threshold>(c.socio_rule).max_distance;
  }
  return {{"state", c.state},
          {"inputs",
           {{"series", c.series.string()},
            {"adjacency", c.adjacency.string()},
            {"socio", c.socio.string()}}},
          {"window", {{"start", format_date(c.window.first)}, {"end", format_date(c.window.last)}}},
          {"target", c.target},
          {"per100k", c.per100k},
          {"baseline_features", c.baseline_features},
          {"factors", c.factors},
          {"graph", std::move(graph)},
          {"model",
           {{"members", c.ensemble.members},
            {"hidden_dim", c.ensemble.hidden_dim},
            {"dropout", c.ensemble.dropout},
            {"lags", c.ensemble.lags},
            {"horizon", c.ensemble.horizon},
            {"standard_gru", c.ensemble.standard_gru}}},
          {"train",
           {{"epochs", c.epochs},
            {"runs", c.runs},
            {"lr", c.optimizer.lr},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"eps", c.optimizer.eps},
            {"seed", c.seed},
            {"jobs", c.jobs}}},
          {"vote", {{"alpha", c.alphas}, {"min_samples", c.min_samples}}},
          {"viz", {{"bins", c.bins}}}};
}

std::string format_alpha(double alpha) {
  std::ostringstream os;
  os << alpha;
  return os.str();
}

}  // namespace geocon
