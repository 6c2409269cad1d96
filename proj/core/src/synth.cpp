#include "geocon/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "geocon/dates.hpp"
#include "geocon/graphs.hpp"
#include "geocon/rng.hpp"

namespace geocon {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

SynthResult generate_synthetic(const SynthOptions& o, const fs::path& dir) {
  const std::size_t N = o.counties;
  if (N < 2) throw Error("synthetic state needs at least 2 counties");
  if (N > 499) throw Error("synthetic state supports at most 499 counties");
  if (o.signal_set > N) throw Error("signal set larger than the county count");
  if (o.timesteps < 2) throw Error("synthetic state needs at least 2 days");
  if (o.state.size() != 2) throw Error("state code must have two digits");
  const Date start = parse_date(o.start);
  fs::create_directories(dir);

  const SeedSplitter seeds(o.seed);
  SynthResult result;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < N; ++i) {
    char code[4];
    std::snprintf(code, sizeof code, "%03zu", 2 * i + 1);
    result.counties.push_back(o.state + code);
    names.push_back("Synth County " + std::string(code));
  }

  // Rook adjacency on a near-square grid.
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(N))));
  std::vector<std::vector<std::size_t>> nbrs(N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t c = i % cols;
    if (c + 1 < cols && i + 1 < N) {
      nbrs[i].push_back(i + 1);
      nbrs[i + 1].push_back(i);
    }
    if (i + cols < N) {
      nbrs[i].push_back(i + cols);
      nbrs[i + cols].push_back(i);
    }
  }
  for (auto& n : nbrs) std::sort(n.begin(), n.end());

  std::vector<std::size_t> order(N);
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  auto pick = seeds.stream("signal_set");
  std::shuffle(order.begin(), order.end(), pick);
  std::vector<bool> in_signal(N, false);
  for (std::size_t i = 0; i < o.signal_set; ++i) in_signal[order[i]] = true;
  for (std::size_t i = 0; i < N; ++i) {
    if (in_signal[i]) result.signal_set.push_back(result.counties[i]);
  }

  auto pop_rng = seeds.stream("population");
  std::uniform_int_distribution<std::int64_t> pop_dist(20000, 900000);
  std::vector<std::int64_t> population(N);
  for (auto& p : population) p = pop_dist(pop_rng);

  // Dynamics, with a burn-in so the series start near stationarity.
  const std::size_t burn = 100 + o.lag;
  const std::size_t total = burn + o.timesteps;
  auto dyn = seeds.stream("dynamics");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> f(total, std::vector<double>(N, 0.0));
  std::vector<std::vector<double>> y(total, std::vector<double>(N, 0.0));
  const double innov = std::sqrt(1.0 - o.factor_phi * o.factor_phi);
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t v = 0; v < N; ++v) {
      const double prev = t > 0 ? f[t - 1][v] : 0.0;
      f[t][v] = o.factor_phi * prev + (t > 0 ? innov : 1.0) * gauss(dyn);
    }
    if (t == 0) continue;
    for (std::size_t v = 0; v < N; ++v) {
      double nb = 0.0;
      for (std::size_t u : nbrs[v]) nb += y[t - 1][u];
      if (!nbrs[v].empty()) nb /= static_cast<double>(nbrs[v].size());
      double drive = 0.0;
      if (in_signal[v] && t >= o.lag) drive = o.beta * f[t - o.lag][v];
      y[t][v] = o.self_weight * y[t - 1][v] + o.neighbor_weight * nb + drive + o.noise * gauss(dyn);
    }
  }

  auto weather = seeds.stream("weather");
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> temp_phase(N);
  for (auto& p : temp_phase) p = phase(weather);

  std::string series = "fips,date,variable,value,population\n";
  for (std::size_t v = 0; v < N; ++v) {
    const std::string& fips = result.counties[v];
    const std::string pop = std::to_string(population[v]);
    for (std::size_t t = 0; t < o.timesteps; ++t) {
      const std::string date = format_date(start + std::chrono::days(t));
      const double rate = std::max(0.0, o.base_rate + o.rate_scale * y[burn + t][v]);
      const double count = rate * static_cast<double>(population[v]) / 1e5;
      series += fips + "," + date + ",hospitalizations," + fixed(count) + "," + pop + "\n";
    }
    for (std::size_t t = 0; t < o.timesteps; ++t) {
      const std::string date = format_date(start + std::chrono::days(t));
      series += fips + "," + date + ",aod," + fixed(0.3 + 0.1 * f[burn + t][v]) + ",\n";
    }
    for (std::size_t t = 0; t < o.timesteps; ++t) {
      const std::string date = format_date(start + std::chrono::days(t));
      const double season = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 365.0 +
                                     temp_phase[v]);
      series += fips + "," + date + ",temperature," + fixed(288.0 + 8.0 * season + gauss(weather)) +
                ",\n";
      series += fips + "," + date + ",relative_humidity," +
                fixed(60.0 - 10.0 * season + 3.0 * gauss(weather)) + ",\n";
    }
  }
  // Each (fips, variable) block must be date-ordered; interleaved temperature
  // and humidity rows keep that per variable.
  write_file(dir / "series.csv", series);

  std::string adjacency;
  for (std::size_t v = 0; v < N; ++v) {
    adjacency += names[v] + "|" + result.counties[v] + "|" + names[v] + "|" + result.counties[v] + "\n";
    for (std::size_t u : nbrs[v]) adjacency += "||" + names[u] + "|" + result.counties[u] + "\n";
  }
  write_file(dir / "adjacency.txt", adjacency);

  auto socio_rng = seeds.stream("socio");
  std::string socio = "fips,index_name,value\n";
  for (std::size_t v = 0; v < N; ++v) {
    for (const auto& index : socio_index_names()) {
      socio += result.counties[v] + "," + index + "," + fixed(50.0 + 10.0 * gauss(socio_rng)) + "\n";
    }
  }
  write_file(dir / "socio.csv", socio);

  const nlohmann::json truth = {{"state", o.state},
                                {"counties", result.counties},
                                {"signal_set", result.signal_set},
                                {"beta", o.beta},
                                {"lag", o.lag},
                                {"seed", o.seed}};
  write_file(dir / "truth.json", truth.dump(2) + "\n");

  const nlohmann::json config = {
      {"state", o.state},
      {"inputs", {{"series", "series.csv"}, {"adjacency", "adjacency.txt"}, {"socio", "socio.csv"}}},
      {"window",
       {{"start", format_date(start)},
        {"end", format_date(start + std::chrono::days(o.timesteps - 1))}}},
      {"target", "hospitalizations"},
      {"per100k", true},
      {"factors", {"aod"}},
      {"graph", {{"kinds", {o.graph_kind}}, {"top_k", 4}}},
      {"model",
       {{"members", o.members}, {"hidden_dim", o.hidden_dim}, {"dropout", o.dropout},
        {"lags", 5}, {"horizon", 15}}},
      {"train",
       {{"epochs", o.epochs}, {"runs", o.runs}, {"lr", o.lr}, {"seed", o.seed}, {"jobs", o.jobs}}},
      {"vote", {{"alpha", 0.1}}}};
  result.config = dir / "config.json";
  write_file(result.config, config.dump(2) + "\n");
  return result;
}

}  // namespace geocon
