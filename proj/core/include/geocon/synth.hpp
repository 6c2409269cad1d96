#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace geocon {

/// Planted-signal synthetic state. Counties sit on a near-square grid with
/// rook adjacency. Per county v and day t:
///   f_v(t) = phi f_v(t-1) + sqrt(1 - phi^2) e           (AR(1) factor, unit variance)
///   y_v(t) = a y_v(t-1) + c mean_{u~v} y_u(t-1)
///            + beta [v in S] f_v(t - lag) + sigma e'
///   hospitalizations = max(0, base + scale y) * population / 1e5
/// Temperature and relative humidity are seasonal noise unrelated to y.
struct SynthOptions {
  std::size_t counties = 20;
  std::size_t signal_set = 5;
  double beta = 0.8;
  std::size_t timesteps = 250;
  std::uint64_t seed = 7;
  std::string state = "99";
  std::string start = "2020-02-01";

  double factor_phi = 0.9;
  double self_weight = 0.5;
  double neighbor_weight = 0.2;
  std::size_t lag = 10;
  double noise = 0.5;
  double base_rate = 30.0;
  double rate_scale = 2.0;

  // Settings written into the generated experiment config.
  std::size_t members = 8;
  std::size_t runs = 10;
  std::size_t epochs = 60;
  std::size_t hidden_dim = 8;
  double dropout = 0.1;
  double lr = 0.02;
  std::size_t jobs = 1;
  std::string graph_kind = "border";
};

struct SynthResult {
  std::filesystem::path config;
  std::vector<std::string> counties;    // ascending FIPS
  std::vector<std::string> signal_set;  // ascending FIPS
};

/// Writes series.csv, adjacency.txt, socio.csv, truth.json and config.json
/// into `dir`. Output is a pure function of the options.
SynthResult generate_synthetic(const SynthOptions& options, const std::filesystem::path& dir);

}  // namespace geocon
