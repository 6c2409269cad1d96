#include "geocon/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "geocon/consensus.hpp"
#include "geocon/rng.hpp"

namespace geocon {

RunKey key_of(const RunRecord& r) { return {r.member_index, r.run, r.feature_set, r.seed}; }

nlohmann::json to_json(const RunRecord& r) {
  return {{"state", r.state},
          {"model", r.model},
          {"member_index", r.member_index},
          {"run", r.run},
          {"feature_set", r.feature_set},
          {"factor", r.factor},
          {"graph_kind", to_string(r.graph_kind)},
          {"seed", r.seed},
          {"status", r.failed ? "failed" : "ok"},
          {"failure", r.failure},
          {"rmse", r.rmse},
          {"rmse_by_horizon", r.rmse_by_horizon},
          {"loss_curve", r.loss_curve}};
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.state = j.at("state").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.member_index = j.at("member_index").get<std::size_t>();
  r.run = j.at("run").get<std::size_t>();
  r.feature_set = j.at("feature_set").get<std::string>();
  r.factor = j.at("factor").get<std::string>();
  r.graph_kind = parse_graph_kind(j.at("graph_kind").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.failed = j.at("status").get<std::string>() == "failed";
  r.failure = j.at("failure").get<std::string>();
  r.rmse = j.at("rmse").get<std::vector<double>>();
  r.rmse_by_horizon = j.at("rmse_by_horizon").get<std::vector<std::vector<double>>>();
  r.loss_curve = j.at("loss_curve").get<std::vector<double>>();
  return r;
}

void write_records(std::ostream& out, const std::vector<RunRecord>& records) {
  for (const RunRecord& r : records) out << to_json(r).dump() << '\n';
}

std::vector<RunRecord> read_records(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<RunRecord> out;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string line = text.substr(pos, complete ? nl - pos : std::string::npos);
    pos = complete ? nl + 1 : text.size();
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(run_record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      if (!complete) break;  // torn final write
      throw Error("run record line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open run records " + path.string());
  return read_records(in);
}

std::uint64_t run_seed(std::uint64_t base, std::size_t member_index, std::size_t run) {
  return combine_seed(base, member_index + 1, run + 1);
}

void sort_records(std::vector<RunRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return key_of(a) < key_of(b);
  });
}

namespace {

/// Scaled windows and raw targets for one feature set.
struct PreparedSet {
  std::string name;
  std::size_t features = 0;
  WindowSet train;
  WindowSet test;
  std::vector<Tensor> test_actual;  // unscaled targets
  ScalingStats target_stats;
};

PreparedSet prepare(const ExperimentConfig& config, const FeaturePanel& raw,
                    std::vector<std::string> variables, std::string name) {
  const auto target_pos = std::find(variables.begin(), variables.end(), config.target);
  if (target_pos == variables.end()) {
    throw Error("feature set '" + name + "' does not contain the target '" + config.target + "'");
  }
  const FeaturePanel sub = select_variables(raw, variables);
  const Split split = split_80_20(sub.timesteps());
  const ScaledPanel scaled = zscore(sub, split.train);

  WindowOptions opts;
  opts.target_channel = static_cast<std::size_t>(target_pos - variables.begin());
  const std::size_t h = config.ensemble.lags;
  const std::size_t horizon = config.ensemble.horizon;

  PreparedSet p;
  p.name = std::move(name);
  p.features = variables.size();
  p.target_stats = scaled.stats[opts.target_channel];
  p.train = make_windows(scaled.panel, h, horizon, split.train, opts);
  opts.inputs_may_precede_range = true;
  p.test = make_windows(scaled.panel, h, horizon, split.test, opts);
  p.test_actual = make_windows(sub, h, horizon, split.test, opts).targets;
  if (p.train.empty() || p.test.empty()) {
    throw Error("panel of " + std::to_string(sub.timesteps()) + " days is too short for h=" +
                std::to_string(h) + ", omega=" + std::to_string(horizon) +
                " after the 80/20 split");
  }
  return p;
}

struct Task {
  std::size_t member_index;
  std::size_t run;
  const PreparedSet* set;
  std::uint64_t seed;
};

RunRecord execute(const ExperimentConfig& config, const ModelSpec& member, const Task& task,
                  const nd::Adjacency& adj, std::size_t nodes) {
  RunRecord rec;
  rec.state = config.state;
  rec.model = member.name;
  rec.member_index = task.member_index;
  rec.run = task.run;
  rec.feature_set = task.set->name;
  rec.factor = config.factor;
  rec.graph_kind = config.graph_kind;
  rec.seed = task.seed;

  ModelSpec spec = member;
  spec.output_nodes = nodes;
  spec.input_features = task.set->features;

  TrainOptions options;
  options.epochs = config.epochs;
  options.optimizer = config.optimizer;
  options.seed = task.seed;
  const nd::Adjacency* graph = spec.kind == ModelKind::Rgc ? &adj : nullptr;
  TrainResult trained = train_model(spec, task.set->train, graph, options);
  rec.loss_curve = std::move(trained.loss_curve);
  if (trained.failed) {
    rec.failed = true;
    rec.failure = trained.failure;
    return rec;
  }
  try {
    const auto preds = predict(spec, trained.params, graph, task.set->test);
    const ScalingStats& st = task.set->target_stats;
    RmseAccumulator acc;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      Tensor unscaled = preds[i];
      if (!st.degenerate) {
        for (double& v : unscaled.values()) v = v * st.stddev + st.mean;
      }
      acc.add(unscaled, task.set->test_actual[i]);
    }
    rec.rmse = acc.per_county();
    rec.rmse_by_horizon = acc.per_horizon();
  } catch (const Error& e) {
    rec.failed = true;
    rec.failure = std::string("evaluation: ") + e.what();
  }
  return rec;
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                      const std::vector<RunRecord>& completed,
                                      const RecordSink& sink) {
  if (config.factor.empty()) throw Error("experiment needs a factor variable");
  if (config.runs < 1) throw Error("experiment needs at least one run");
  if (data.graph.nodes != data.panel.county_order) {
    throw Error("graph node order does not match the panel county order");
  }
  if (std::find(config.baseline_features.begin(), config.baseline_features.end(), config.factor) !=
      config.baseline_features.end()) {
    throw Error("factor '" + config.factor + "' is already a baseline feature");
  }
  const std::vector<ModelSpec> roster = make_ensemble(config.ensemble);

  std::vector<std::string> with_factor = config.baseline_features;
  with_factor.push_back(config.factor);
  const PreparedSet sets[2] = {prepare(config, data.panel, config.baseline_features, kBaseline),
                               prepare(config, data.panel, with_factor, kWithFactor)};
  const nd::Adjacency adj = data.graph.adjacency();
  const std::size_t nodes = data.panel.counties();

  std::set<RunKey> done;
  for (const RunRecord& r : completed) done.insert(key_of(r));

  std::vector<Task> tasks;
  for (std::size_t m = 0; m < roster.size(); ++m) {
    for (std::size_t run = 0; run < config.runs; ++run) {
      const std::uint64_t seed = run_seed(config.seed, m, run);
      for (const PreparedSet& s : sets) {
        if (done.contains(RunKey{m, run, s.name, seed})) continue;
        tasks.push_back({m, run, &s, seed});
      }
    }
  }

  std::vector<RunRecord> fresh(tasks.size());
  std::mutex sink_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        fresh[i] = execute(config, roster[tasks[i].member_index], tasks[i], adj, nodes);
        if (sink) {
          std::lock_guard lock(sink_mutex);
          sink(fresh[i]);
        }
      } catch (...) {
        std::lock_guard lock(sink_mutex);
        if (!first_error) first_error = std::current_exception();
        next = tasks.size();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(config.jobs, 1), tasks.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<RunRecord> all;
  for (const RunRecord& r : completed) {
    if (r.member_index < roster.size() && r.run < config.runs) all.push_back(r);
  }
  for (RunRecord& r : fresh) all.push_back(std::move(r));
  sort_records(all);
  return all;
}

}  // namespace geocon
