#include "geocon/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "geocon/consensus.hpp"
#include "geocon/experiment.hpp"
#include "geocon/graphs.hpp"

namespace geocon {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path StateArtifacts::graph(GraphKind kind) const {
  return root_ / ("graph_" + to_string(kind) + ".json");
}

fs::path StateArtifacts::centrality(GraphKind kind) const {
  return root_ / ("centrality_" + to_string(kind) + ".json");
}

fs::path StateArtifacts::runs(const std::string& factor, GraphKind kind) const {
  return root_ / "runs" / (factor + "_" + to_string(kind) + ".jsonl");
}

fs::path StateArtifacts::votes(const std::string& factor, GraphKind kind, double alpha) const {
  return root_ / "votes" / (factor + "_" + to_string(kind) + "_" + format_alpha(alpha) + ".json");
}

json to_json(const StoredPanel& s) {
  const FeaturePanel& p = s.panel;
  json population = json::object();
  for (const auto& [fips, n] : s.population) population[fips] = n;
  std::vector<double> data(p.data.values().begin(), p.data.values().end());
  return {{"state", s.state},
          {"county_order", p.county_order},
          {"variable_order", p.variable_order},
          {"start", format_date(p.range.first)},
          {"end", format_date(p.range.last)},
          {"shape", p.data.shape()},
          {"data", std::move(data)},
          {"imputed", p.imputed},
          {"population", std::move(population)}};
}

StoredPanel stored_panel_from_json(const json& j) {
  StoredPanel s;
  s.state = j.at("state").get<std::string>();
  FeaturePanel& p = s.panel;
  p.county_order = j.at("county_order").get<std::vector<std::string>>();
  p.variable_order = j.at("variable_order").get<std::vector<std::string>>();
  p.range = parse_date_range(j.at("start").get<std::string>(), j.at("end").get<std::string>());
  p.data = Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
  p.imputed = j.at("imputed").get<std::vector<std::uint8_t>>();
  if (p.data.rank() != 3 || p.timesteps() != p.range.days() ||
      p.counties() != p.county_order.size() || p.features() != p.variable_order.size() ||
      p.imputed.size() != p.data.size()) {
    throw Error("stored panel is inconsistent with its orderings");
  }
  for (const auto& [fips, n] : j.at("population").items()) s.population[fips] = n.get<std::int64_t>();
  return s;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing artifact " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

StoredPanel load_panel(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error("missing artifact " + path.string() + "; run `geocon ingest` first");
  }
  return stored_panel_from_json(read_json(path));
}

void write_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string dump(const json& j) { return j.dump(1) + "\n"; }

void require_artifact(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw Error("missing artifact " + path.string() + "; run `geocon " + stage + "` first");
  }
}

void note(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

}  // namespace

void run_ingest(const PipelineConfig& config, const fs::path& out, const Logger& log) {
  const StateArtifacts art(out, config.state);
  LoadedSeries loaded = load_series(config.series);
  for (const auto& r : loaded.rejected) {
    note(log, config.series.string() + ": rejected line " + std::to_string(r.line) + ": " + r.message);
  }

  StoredPanel stored;
  stored.state = config.state;
  std::vector<CountySeries> series;
  std::set<std::string> variables;
  for (CountySeries& s : loaded.series) {
    if (state_of(s.fips) != config.state) continue;
    if (is_clinical(s.variable) && s.population) stored.population[s.fips] = *s.population;
    if (config.per100k && is_clinical(s.variable)) s = per_100k(s);
    variables.insert(s.variable);
    series.push_back(std::move(s));
  }
  if (series.empty()) {
    throw Error(config.series.string() + ": no series for state " + config.state);
  }
  std::vector<std::string> needed = config.baseline_variables();
  for (const auto& f : config.factors) needed.push_back(config.panel_variable(f));
  for (const auto& v : needed) {
    if (!variables.contains(v)) {
      throw Error(config.series.string() + ": variable '" + v + "' not found for state " +
                  config.state);
    }
  }

  stored.panel = align_panel(series, config.window);
  note(log, "panel " + config.state + ": " + std::to_string(stored.panel.timesteps()) + " days x " +
                std::to_string(stored.panel.counties()) + " counties x " +
                std::to_string(stored.panel.features()) + " variables, " +
                std::to_string(stored.panel.imputed_count()) + " imputed cells");

  json rejected = json::array();
  for (const auto& r : loaded.rejected) rejected.push_back({{"line", r.line}, {"message", r.message}});
  write_atomic(art.panel(), to_json(stored).dump() + "\n");
  write_atomic(art.ingest_report(), dump({{"source", config.series.filename().string()},
                                          {"rejected", std::move(rejected)},
                                          {"imputed_cells", stored.panel.imputed_count()}}));
}

void run_graph(const PipelineConfig& config, const fs::path& out, const Logger& log) {
  const StateArtifacts art(out, config.state);
  const StoredPanel stored = load_panel(art.panel());
  const auto& order = stored.panel.county_order;

  BorderGraphResult border = build_border_graph(config.adjacency, config.state, order);
  for (const auto& w : border.warnings) note(log, "border graph: " + w);
  const CountyGraph border_graph = reorder(border.graph, order);

  std::map<std::string, SocioVector> by_fips;
  for (SocioVector& v : load_socio(config.socio)) by_fips.emplace(v.fips, std::move(v));
  std::vector<SocioVector> vectors;
  for (const auto& fips : order) {
    const auto it = by_fips.find(fips);
    if (it == by_fips.end()) {
      throw Error(config.socio.string() + ": no socioeconomic indices for county " + fips);
    }
    vectors.push_back(it->second);
  }
  const DistanceMatrix distances = socio_distance_matrix(vectors, config.socio_scaling);
  const CountyGraph socio_graph = build_socio_graph(distances, config.socio_rule);

  for (const CountyGraph* g : {&border_graph, &socio_graph}) {
    write_atomic(art.graph(g->kind), dump(to_json(*g)));
    write_atomic(art.centrality(g->kind), dump(to_json(ranked(degree_centrality(*g)))));
    note(log, to_string(g->kind) + " graph: " + std::to_string(g->nodes.size()) + " nodes, " +
                  std::to_string(g->edges.size()) + " edges");
  }
  write_atomic(art.socio_distances(), dump(to_json(distances)));

  json counties = json::array();
  for (const auto& fips : order) {
    const auto name = border.county_names.find(fips);
    const auto pop = stored.population.find(fips);
    counties.push_back({{"fips", fips},
                        {"name", name == border.county_names.end() ? "" : name->second},
                        {"population", pop == stored.population.end()
                                           ? json(nullptr)
                                           : json(pop->second)}});
  }
  write_atomic(art.counties(), dump(counties));
}

void run_train(const PipelineConfig& config, const fs::path& out, const Logger& log,
               const TrainStageOptions& options) {
  const StateArtifacts art(out, config.state);
  const StoredPanel stored = load_panel(art.panel());
  std::size_t written = 0;
  for (GraphKind kind : config.graph_kinds) {
    require_artifact(art.graph(kind), "graph");
    ExperimentData data{stored.panel, graph_from_json(read_json(art.graph(kind)))};
    for (const auto& factor : config.factors) {
      const ExperimentConfig ec = config.experiment(factor, kind);
      const fs::path path = art.runs(ec.factor, kind);
      std::vector<RunRecord> completed;
      if (fs::exists(path)) {
        completed = read_records(path);
        sort_records(completed);
        std::ostringstream os;
        write_records(os, completed);
        write_atomic(path, os.str());  // drops a torn final line before appending
        note(log, path.filename().string() + ": resuming with " +
                      std::to_string(completed.size()) + " completed records");
      }
      fs::create_directories(path.parent_path());
      std::ofstream append(path, std::ios::binary | std::ios::app);
      if (!append) throw Error("cannot write " + path.string());
      const RecordSink sink = [&](const RunRecord& r) {
        append << to_json(r).dump() << '\n';
        append.flush();
        if (r.failed) note(log, r.model + " run " + std::to_string(r.run) + " " + r.feature_set +
                                    " failed: " + r.failure);
        if (++written >= options.stop_after) throw Interrupted("training interrupted");
      };
      std::vector<RunRecord> all = run_experiment(ec, data, completed, sink);
      append.close();
      std::ostringstream os;
      write_records(os, all);
      write_atomic(path, os.str());
      note(log, path.filename().string() + ": " + std::to_string(all.size()) + " records");
    }
  }
}

void run_vote(const PipelineConfig& config, const fs::path& out, const Logger& log) {
  const StateArtifacts art(out, config.state);
  const StoredPanel stored = load_panel(art.panel());
  for (GraphKind kind : config.graph_kinds) {
    for (const auto& factor : config.factors) {
      const ExperimentConfig ec = config.experiment(factor, kind);
      const fs::path runs = art.runs(ec.factor, kind);
      require_artifact(runs, "train");
      const std::vector<RunRecord> records = read_records(runs);
      for (double alpha : config.alphas) {
        TallyOptions opts;
        opts.alpha = alpha;
        opts.min_samples = config.min_samples;
        VoteTable table = tally_votes(records, stored.panel.county_order, opts);
        table.state = config.state;
        table.factor = ec.factor;
        table.graph_kind = kind;
        for (const auto& w : table.warnings) note(log, "votes " + ec.factor + ": " + w);
        json j = to_json(table);
        j["aggregate"] = to_json(aggregate_votes(table));
        write_atomic(art.votes(ec.factor, kind, alpha), dump(j));
        note(log, ec.factor + "/" + to_string(kind) + " alpha=" + format_alpha(alpha) + ": " +
                      std::to_string(aggregate_votes(table).total) + " votes");
      }
    }
  }
}

PipelineConfig run_demo(const fs::path& out, std::uint64_t seed, std::size_t jobs,
                        const Logger& log) {
  SynthOptions o;
  o.seed = seed;
  o.counties = 20;
  o.signal_set = 5;
  o.timesteps = 120;
  o.members = 8;
  o.runs = 4;
  o.epochs = 20;
  o.jobs = jobs;
  const SynthResult synth = generate_synthetic(o, out / "inputs");
  json cj = read_json(synth.config);
  cj["factors"] = {"aod", "temperature"};
  cj["graph"]["kinds"] = {"border", "socio"};
  write_atomic(synth.config, cj.dump(2) + "\n");

  const PipelineConfig config = load_config(synth.config);
  run_ingest(config, out, log);
  run_graph(config, out, log);
  run_train(config, out, log);
  run_vote(config, out, log);
  return config;
}

}  // namespace geocon
