#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace geocon {

using CountyValues = std::map<std::string, double>;  // fips -> value

struct QuantileBinning {
  std::size_t k = 0;                             // requested bin count
  std::vector<double> breakpoints;               // strictly ascending
  std::map<std::string, std::size_t> assignment;  // fips -> bin in [0, bins())
  bool degenerate = false;                       // all values equal

  std::size_t bins() const noexcept { return breakpoints.size() + 1; }
};

/// Breakpoints at the i/k empirical quantiles (linear interpolation,
/// de-duplicated); a value equal to a breakpoint goes to the lower bin.
QuantileBinning quantile_bins(const CountyValues& values, std::size_t k = 5);

/// Counties per bin; sums to the county count.
std::vector<std::size_t> histogram(const QuantileBinning& binning);

struct TrendLine {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  bool degenerate = false;  // a variance was zero; r reported as 0
  std::size_t points = 0;
};

/// Ordinary least squares of y on x over the counties present in both maps.
TrendLine trend_line(const CountyValues& x, const CountyValues& y);

nlohmann::json to_json(const QuantileBinning& binning);
nlohmann::json to_json(const TrendLine& line);

}  // namespace geocon
