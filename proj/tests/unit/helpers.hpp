#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "geocon/ingest.hpp"
#include "geocon/tensor.hpp"

namespace geocon::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.values()) v = u(rng);
  return t;
}

/// Panel with counties "99001", "99003", ... and variables v0, v1, ...
inline FeaturePanel random_panel(std::size_t T, std::size_t N, std::size_t F, std::mt19937_64& rng) {
  FeaturePanel p;
  for (std::size_t n = 0; n < N; ++n) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "99%03zu", 2 * n + 1);
    p.county_order.emplace_back(buf);
  }
  for (std::size_t f = 0; f < F; ++f) p.variable_order.push_back("v" + std::to_string(f));
  p.range = parse_date_range("2020-02-01", "2020-02-01");
  p.range.last = p.range.first + std::chrono::days(T - 1);
  p.data = random_tensor({T, N, F}, rng);
  p.imputed.assign(T * N * F, 0);
  return p;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("geocon_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace geocon::testing
