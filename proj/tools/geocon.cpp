// Command-line driver: ingest -> graph -> train -> vote, plus synth, demo, serve.
#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "geocon/config.hpp"
#include "geocon/pipeline.hpp"
#include "geocon/serve.hpp"
#include "geocon/synth.hpp"

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::string out = "out";
  std::size_t jobs = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (JSON)")
      ->envname("GEOCON_CONFIG")
      ->required();
  cmd->add_option("--out", c.out, "Output directory")->envname("GEOCON_OUT")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads for training (overrides config)")
      ->envname("GEOCON_JOBS");
  cmd->add_option("--seed", c.seed, "Base seed (overrides config)")->envname("GEOCON_SEED");
}

geocon::PipelineConfig resolve(const Common& c, const CLI::App* cmd) {
  geocon::PipelineConfig config = geocon::load_config(c.config);
  if (c.jobs > 0) config.jobs = c.jobs;
  if (cmd->count("--seed") > 0 || std::getenv("GEOCON_SEED")) config.seed = c.seed;
  return config;
}

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

geocon::ApiServer* active_server = nullptr;

extern "C" void on_signal(int) {
  if (active_server) active_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"County-level forecasting ensemble with consensus voting"};
  app.require_subcommand(1);

  Common common;
  auto* ingest = app.add_subcommand("ingest", "Validate raw CSVs and write the aligned panel");
  auto* graph = app.add_subcommand("graph", "Build border and socioeconomic graphs");
  auto* train = app.add_subcommand("train", "Run the ensemble sweep (resumable)");
  auto* vote = app.add_subcommand("vote", "Tally vote tables from run records");
  auto* all = app.add_subcommand("all", "ingest, graph, train and vote in sequence");
  for (auto* cmd : {ingest, graph, train, vote, all}) add_common(cmd, common);
  std::size_t stop_after = 0;
  train->add_option("--stop-after", stop_after, "Abort after this many new records (testing)");

  geocon::SynthOptions synth_opts;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "Generate a planted-signal synthetic state");
  synth->add_option("--out", synth_out, "Directory for the generated inputs")
      ->envname("GEOCON_OUT")
      ->capture_default_str();
  synth->add_option("--counties", synth_opts.counties)->capture_default_str();
  synth->add_option("--signal-set", synth_opts.signal_set)->capture_default_str();
  synth->add_option("--beta", synth_opts.beta)->capture_default_str();
  synth->add_option("--timesteps", synth_opts.timesteps)->capture_default_str();
  synth->add_option("--seed", synth_opts.seed)->envname("GEOCON_SEED")->capture_default_str();
  synth->add_option("--state", synth_opts.state)->capture_default_str();
  synth->add_option("--members", synth_opts.members)->capture_default_str();
  synth->add_option("--runs", synth_opts.runs)->capture_default_str();
  synth->add_option("--epochs", synth_opts.epochs)->capture_default_str();
  synth->add_option("--hidden", synth_opts.hidden_dim)->capture_default_str();
  synth->add_option("--dropout", synth_opts.dropout)->capture_default_str();
  synth->add_option("--graph-kind", synth_opts.graph_kind)->capture_default_str();
  synth->add_option("--jobs", synth_opts.jobs, "Written into the config")
      ->envname("GEOCON_JOBS")
      ->capture_default_str();

  std::string demo_out = "demo";
  std::uint64_t demo_seed = 7;
  std::size_t demo_jobs = 1;
  auto* demo = app.add_subcommand("demo", "Small end-to-end synthetic walkthrough");
  demo->add_option("--out", demo_out)->envname("GEOCON_OUT")->capture_default_str();
  demo->add_option("--seed", demo_seed)->envname("GEOCON_SEED")->capture_default_str();
  demo->add_option("--jobs", demo_jobs)->envname("GEOCON_JOBS")->capture_default_str();

  std::string data_dir = "out";
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the JSON API over an output directory");
  serve->add_option("--data,--out", data_dir, "Output directory to serve")
      ->envname("GEOCON_DATA")
      ->capture_default_str();
  serve->add_option("--port", port)->envname("GEOCON_PORT")->capture_default_str();
  serve->add_option("--host", host)->envname("GEOCON_HOST")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto r = geocon::generate_synthetic(synth_opts, synth_out);
      std::cout << r.config.string() << '\n';
    } else if (*demo) {
      const auto config = geocon::run_demo(demo_out, demo_seed, demo_jobs, log_line);
      std::cout << (fs::path(demo_out) / config.state).string() << '\n';
    } else if (*serve) {
      const geocon::ResultStore store = geocon::ResultStore::load(data_dir);
      geocon::ApiServer server(store);
      const int bound = server.bind(host, port);
      active_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving " << store.states().size() << " state(s) from " << data_dir
                << " on http://" << host << ":" << bound << '\n';
      server.listen();
      active_server = nullptr;
    } else {
      CLI::App* cmd = app.get_subcommands().front();
      const geocon::PipelineConfig config = resolve(common, cmd);
      const fs::path out = common.out;
      if (*ingest || *all) geocon::run_ingest(config, out, log_line);
      if (*graph || *all) geocon::run_graph(config, out, log_line);
      if (*train || *all) {
        geocon::TrainStageOptions opts;
        if (stop_after > 0) opts.stop_after = stop_after;
        geocon::run_train(config, out, log_line, opts);
      }
      if (*vote || *all) geocon::run_vote(config, out, log_line);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
