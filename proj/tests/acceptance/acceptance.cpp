// Acceptance suite: one PASS/FAIL line per criterion.
//   geocon_acceptance                    run every criterion
//   geocon_acceptance --criterion NAME   run one
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "geocon/consensus.hpp"
#include "geocon/experiment.hpp"
#include "geocon/gradcheck.hpp"
#include "geocon/graphs.hpp"
#include "geocon/models.hpp"
#include "geocon/pipeline.hpp"
#include "geocon/train.hpp"
#include "geocon/viz_stats.hpp"

using namespace geocon;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kPValueTol = 0.02;
constexpr std::size_t kStatTrials = 100;
constexpr std::size_t kStatMinAgree = 95;
constexpr std::size_t kResamples = 100000;
constexpr double kVoteMargin = 3.0;
constexpr double kPipelineBudgetSeconds = 600.0;
constexpr double kNullVoteFraction = 0.10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("geocon_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(shape);
  for (double& v : t.values()) v = u(rng);
  return t;
}

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

const Logger quiet = [](const std::string&) {};

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  EnsembleConfig ec;
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (ModelSpec spec : make_ensemble(ec)) {
    if (spec.kind != ModelKind::Rgc) continue;
    spec.output_nodes = 4;
    spec.input_features = 2;
    spec.hidden_dim = 3;
    spec.lags = 2;
    spec.horizon = 2;
    spec.dropout = 0.0;
    const nd::Adjacency adj = nd::Adjacency::from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {0, 2}});
    std::mt19937_64 rng(2024 + checked);
    const std::vector<Tensor> steps = {random_tensor({4, 2}, rng), random_tensor({4, 2}, rng)};
    const Tensor target = random_tensor({4, 2}, rng);
    std::vector<std::string> names;
    std::vector<Tensor> point;
    for (const auto& [name, t] : init_params(spec, 17)) {
      names.push_back(name);
      Tensor p = t;
      for (double& v : p.values()) v += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
      point.push_back(std::move(p));
    }
    const auto f = [&](nd::Tape& tape, std::span<const nd::Var> vars) {
      return nd::mse_loss(forward_batch(tape, steps, &adj, BoundParams(names, vars), spec), target);
    };
    const nd::GradCheckReport r = nd::grad_check(f, point, 1e-5, kGradRelTol);
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = spec.name;
    }
    ++checked;
  }
  const double secs = seconds_since(t0);
  return {checked > 0 && worst < kGradRelTol && secs < kGradBudgetSeconds,
          fmt("%zu rgc variants, max relative error %.2e (%s), %.1fs", checked, worst,
              worst_name.c_str(), secs)};
}

Outcome literal_gru_equations() {
  ModelSpec spec;
  spec.name = "rgc";
  spec.hidden_dim = 3;
  spec.output_nodes = 4;
  spec.input_features = 2;
  spec.dropout = 0.0;
  std::mt19937_64 rng(9);
  bool ok = true;
  {
    ParamSet params = init_params(spec, 5);
    for (double& b : params.at("gru.b_z").values()) b = 100.0;  // Z == 1 in double
    nd::Tape tape;
    BoundParams bp(tape, params, false);
    nd::Var q_prev = tape.constant(random_tensor({4, 3}, rng));
    const GruStep g = gru_step(tape.constant(random_tensor({4, 3}, rng)),
                               tape.constant(random_tensor({4, 3}, rng)), q_prev, bp, spec);
    ok = ok && g.update_gate.value() == Tensor(Shape{4, 3}, 1.0) &&
         g.blended.value() == q_prev.value();
  }
  {
    ParamSet params = init_params(spec, 5);
    for (auto& [name, t] : params) {
      if (name.rfind("gru.", 0) == 0) t = Tensor(t.shape(), 0.0);
    }
    nd::Tape tape;
    BoundParams bp(tape, params, false);
    nd::Var q_prev = tape.constant(random_tensor({4, 3}, rng));
    const GruStep g = gru_step(tape.constant(random_tensor({4, 3}, rng)),
                               tape.constant(random_tensor({4, 3}, rng)), q_prev, bp, spec);
    for (std::size_t i = 0; i < 12; ++i) {
      ok = ok && g.update_gate.value()[i] == 0.5 && g.reset_gate.value()[i] == 0.5 &&
           g.blended.value()[i] == 0.5 * q_prev.value()[i];
    }
  }
  return {ok, "Z=1 keeps the previous state exactly; zero weights halve it exactly"};
}

Outcome statistics_soundness() {
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-0.5, 1.5);
  std::size_t agree = 0;
  double worst = 0.0;
  for (std::size_t trial = 0; trial < kStatTrials; ++trial) {
    const double mu = shift(rng);
    std::vector<double> b(10), f(10);
    for (std::size_t i = 0; i < b.size(); ++i) {
      f[i] = 5.0 + z(rng);
      b[i] = f[i] + mu + z(rng);
    }
    const double p = one_tailed_test(b, f, 0.1).p_value;
    const double q = permutation_oracle(b, f, kResamples, 7000 + trial);
    worst = std::max(worst, std::abs(p - q));
    if (std::abs(p - q) <= kPValueTol) ++agree;
  }
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> x_up{2.5, 3.5, 4.5, 5.5};
  const bool zero = one_tailed_test(x, x, 0.1).p_value == 1.0;
  const bool shifted = one_tailed_test(x_up, x, 0.1).p_value == 0.0;
  return {agree >= kStatMinAgree && zero && shifted,
          fmt("%zu/%zu within %.2f (max gap %.3f); zero diffs p=1 %s; constant shift p=0 %s",
              agree, kStatTrials, kPValueTol, worst, zero ? "yes" : "no",
              shifted ? "yes" : "no")};
}

struct PlantedRun {
  VoteTable table;
  std::vector<std::string> signal;
  double seconds = 0.0;
  fs::path runs_file;
};

PlantedRun planted_pipeline(double beta, const std::string& name) {
  const fs::path dir = scratch(name);
  SynthOptions o;  // 20 counties, |S| = 5, 250 days, M = 8, runs = 10
  o.beta = beta;
  o.jobs = jobs();
  const auto t0 = Clock::now();
  const SynthResult s = generate_synthetic(o, dir / "inputs");
  const PipelineConfig cfg = load_config(s.config);
  const fs::path out = dir / "out";
  run_ingest(cfg, out, quiet);
  run_graph(cfg, out, quiet);
  run_train(cfg, out, quiet);
  run_vote(cfg, out, quiet);
  PlantedRun r;
  r.seconds = seconds_since(t0);
  const StateArtifacts art(out, cfg.state);
  const GraphKind kind = cfg.graph_kinds.front();
  r.table = vote_table_from_json(read_json(art.votes(cfg.factors.front(), kind, 0.1)));
  r.signal = s.signal_set;
  r.runs_file = art.runs(cfg.factors.front(), kind);
  return r;
}

Outcome planted_signal() {
  const PlantedRun r = planted_pipeline(0.8, "planted");
  const std::set<std::string> s(r.signal.begin(), r.signal.end());
  double in = 0.0, out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (const auto& c : r.table.counties) {
    if (s.contains(c.fips)) {
      in += static_cast<double>(c.votes);
      ++n_in;
    } else {
      out += static_cast<double>(c.votes);
      ++n_out;
    }
  }
  const double margin = in / static_cast<double>(n_in) - out / static_cast<double>(n_out);
  return {margin >= kVoteMargin && r.seconds < kPipelineBudgetSeconds,
          fmt("mean votes S %.2f vs complement %.2f (margin %.2f, need %.1f); pipeline %.0fs",
              in / static_cast<double>(n_in), out / static_cast<double>(n_out), margin,
              kVoteMargin, r.seconds)};
}

Outcome null_control() {
  const PlantedRun r = planted_pipeline(0.0, "null");
  std::size_t total = 0;
  for (const auto& c : r.table.counties) total += c.votes;
  const std::size_t ceiling = r.table.counties.size() * r.table.members.size();
  const double limit = kNullVoteFraction * static_cast<double>(ceiling);
  return {static_cast<double>(total) <= limit,
          fmt("beta=0: %zu votes of a %zu ceiling (limit %.0f); pipeline %.0fs", total, ceiling,
              limit, r.seconds)};
}

Outcome bookkeeping() {
  // Full roster and run count; few epochs keep the three sweeps cheap.
  SynthOptions o;
  o.epochs = 3;
  o.jobs = jobs();
  const fs::path dir = scratch("bookkeeping");
  const SynthResult s = generate_synthetic(o, dir / "inputs");
  const PipelineConfig cfg = load_config(s.config);
  const auto sweep = [&](const std::string& name, std::size_t stop_after) {
    const fs::path out = dir / name;
    run_ingest(cfg, out, quiet);
    run_graph(cfg, out, quiet);
    if (stop_after > 0) {
      TrainStageOptions opt;
      opt.stop_after = stop_after;
      try {
        run_train(cfg, out, quiet, opt);
      } catch (const Interrupted&) {
      }
      // torn final write
      std::ofstream(StateArtifacts(out, cfg.state).runs(cfg.factors.front(), cfg.graph_kinds.front()),
                    std::ios::app)
          << "{\"state\":\"" << cfg.state << "\",\"mo";
    }
    run_train(cfg, out, quiet);
    return StateArtifacts(out, cfg.state).runs(cfg.factors.front(), cfg.graph_kinds.front());
  };
  const fs::path a = sweep("first", 0);
  const fs::path b = sweep("repeat", 0);
  const fs::path c = sweep("resumed", 57);
  const auto records = read_records(a);
  std::set<RunKey> keys;
  for (const auto& r : records) keys.insert(key_of(r));
  const bool count = records.size() == 160 && keys.size() == 160;
  const bool resumed = slurp(a) == slurp(c);
  const bool repeat = slurp(a) == slurp(b);

  // Forecasts from two trainings with one seed must agree bit for bit.
  const StoredPanel stored = load_panel(StateArtifacts(dir / "first", cfg.state).panel());
  const FeaturePanel panel = select_variables(
      stored.panel, {cfg.target_variable(), cfg.panel_variable(cfg.factors.front())});
  const WindowSet ws = make_windows(zscore(panel, split_80_20(panel.timesteps()).train).panel,
                                    cfg.ensemble.lags, cfg.ensemble.horizon, {0, panel.timesteps()});
  const CountyGraph g = graph_from_json(
      read_json(StateArtifacts(dir / "first", cfg.state).graph(cfg.graph_kinds.front())));
  const nd::Adjacency adj = g.adjacency();
  bool bitwise = true;
  for (ModelSpec spec : make_ensemble(cfg.ensemble)) {
    spec.output_nodes = panel.counties();
    spec.input_features = 2;
    TrainOptions to;
    to.epochs = 3;
    to.seed = run_seed(cfg.seed, 0, 0);
    const nd::Adjacency* ap = spec.kind == ModelKind::Rgc ? &adj : nullptr;
    const auto p1 = predict(spec, train_model(spec, ws, ap, to).params, ap, ws);
    const auto p2 = predict(spec, train_model(spec, ws, ap, to).params, ap, ws);
    bitwise = bitwise && p1 == p2;
  }
  return {count && resumed && repeat && bitwise,
          fmt("%zu records (%zu distinct keys); resume byte-identical %s; repeat byte-identical "
              "%s; forecasts bitwise-identical %s",
              records.size(), keys.size(), resumed ? "yes" : "no", repeat ? "yes" : "no",
              bitwise ? "yes" : "no")};
}

Outcome graph_stat_oracles() {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> z(0.0, 1.0);
  std::size_t failures = 0;
  std::size_t cases = 0;

  // socio k-NN vs brute force from raw index vectors
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SocioVector> v(20);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i].fips = fmt("99%03zu", 2 * i + 1);
      for (double& x : v[i].indices) x = z(rng);
    }
    const std::size_t k = 1 + trial % 6;
    std::set<std::pair<std::size_t, std::size_t>> brute;
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::vector<std::pair<double, std::size_t>> row;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (j == i) continue;
        double d2 = 0.0;
        for (std::size_t q = 0; q < kSocioIndexCount; ++q) {
          d2 += (v[i].indices[q] - v[j].indices[q]) * (v[i].indices[q] - v[j].indices[q]);
        }
        row.push_back({std::sqrt(d2), j});
      }
      std::sort(row.begin(), row.end());
      for (std::size_t r = 0; r < k; ++r) brute.insert(std::minmax(i, row[r].second));
    }
    const CountyGraph g =
        build_socio_graph(socio_distance_matrix(v, SocioScaling::None), TopK{k});
    std::set<std::pair<std::size_t, std::size_t>> got;
    for (const Edge& e : g.edges) got.insert({e.u, e.v});
    ++cases;
    if (got != brute) ++failures;

    // degree centrality vs a dense adjacency scan
    const std::size_t n = g.node_count();
    std::vector<std::vector<int>> dense(n, std::vector<int>(n, 0));
    for (const Edge& e : g.edges) dense[e.u][e.v] = dense[e.v][e.u] = 1;
    const auto c = degree_centrality(g);
    ++cases;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t deg = 0;
      for (std::size_t j = 0; j < n; ++j) deg += static_cast<std::size_t>(dense[i][j]);
      if (c[i].degree != deg ||
          c[i].score != static_cast<double>(deg) / static_cast<double>(n - 1)) {
        ++failures;
        break;
      }
    }
  }

  // quantile binning vs sort rank: bin(r) = #{i in 1..k-1 : r > floor((n-1)i/k)}
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 80;
    const std::size_t k = 2 + rng() % 7;
    CountyValues values;
    std::vector<double> sorted;
    while (values.size() < n) {
      const double x = u(rng);
      if (values.emplace(fmt("%05zu", values.size()), x).second) sorted.push_back(x);
    }
    std::sort(sorted.begin(), sorted.end());
    const QuantileBinning b = quantile_bins(values, k);
    ++cases;
    for (const auto& [fips, x] : values) {
      const auto r = static_cast<std::size_t>(
          std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
      std::size_t expect = 0;
      for (std::size_t i = 1; i < k; ++i) expect += r > (n - 1) * i / k ? 1 : 0;
      // when (n-1)/k < 1 several breakpoints can coincide and merge
      std::set<std::size_t> cuts;
      for (std::size_t i = 1; i < k; ++i) cuts.insert((n - 1) * i / k);
      if (cuts.size() == k - 1 && b.assignment.at(fips) != expect) {
        ++failures;
        break;
      }
    }
  }

  // window count
  FeaturePanel p;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t T = 1 + rng() % 80, h = 1 + rng() % 8, w = 1 + rng() % 16;
    p.county_order = {"99001", "99003"};
    p.variable_order = {"v"};
    p.data = Tensor(Shape{T, 2, 1}, 0.0);
    const std::size_t expect = T >= h + w ? T - h - w + 1 : 0;
    ++cases;
    if (make_windows(p, h, w, {0, T}).size() != expect) ++failures;
  }
  return {failures == 0, fmt("%zu oracle cases, %zu mismatches", cases, failures)};
}

Outcome shape_conformance() {
  bool ok = true;
  std::string detail;
  EnsembleConfig ec;
  for (const std::size_t n : {55u, 60u, 251u}) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
    const nd::Adjacency adj = nd::Adjacency::from_edges(n, edges);
    std::mt19937_64 rng(n);
    const Tensor window = random_tensor({ec.lags, n, 2}, rng);
    for (ModelSpec spec : make_ensemble(ec)) {
      spec.output_nodes = n;
      spec.input_features = 2;
      spec.hidden_dim = 8;
      const ParamSet params = init_params(spec, 3);
      const Tensor out = spec.kind == ModelKind::Rgc ? rgc_forward(window, adj, params, spec)
                                                     : lstm_forward(window, params, spec);
      ok = ok && out.shape() == Shape{15, n};
    }
    detail += fmt("(15,%zu) ", n);
  }
  const DateRange study = parse_date_range("2020-02-01", "2020-12-31");
  const Split s = split_80_20(study.days());
  const bool split_ok = study.days() == 335 && s.train.size() == 268 && s.test.begin == 268 &&
                        s.test.size() == 67;
  return {ok && split_ok, "outputs " + detail + "for all 8 members; " +
                              fmt("%zu-day window splits %zu/%zu", study.days(), s.train.size(),
                                  s.test.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient_fidelity", gradient_fidelity},
      {"literal_gru_equations", literal_gru_equations},
      {"statistics_soundness", statistics_soundness},
      {"planted_signal", planted_signal},
      {"null_control", null_control},
      {"bookkeeping", bookkeeping},
      {"graph_stat_oracles", graph_stat_oracles},
      {"shape_conformance", shape_conformance},
  };
  std::string only;
  if (argc == 3 && std::string(argv[1]) == "--criterion") {
    only = argv[2];
  } else if (argc != 1) {
    std::fprintf(stderr, "usage: %s [--criterion NAME]\n", argv[0]);
    return 2;
  }
  int failed = 0;
  bool matched = false;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && name != only) continue;
    matched = true;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  if (!matched) {
    std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
