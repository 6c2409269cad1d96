#include "geocon/viz_stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

#include "geocon/tensor.hpp"

namespace geocon {

QuantileBinning quantile_bins(const CountyValues& values, std::size_t k) {
  if (values.empty()) throw Error("quantile binning of an empty value set");
  if (k < 2) throw Error("quantile binning needs k >= 2, got " + std::to_string(k));
  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (const auto& [fips, v] : values) {
    if (!std::isfinite(v)) throw Error("non-finite value for county " + fips);
    sorted.push_back(v);
  }
  std::sort(sorted.begin(), sorted.end());

  QuantileBinning out;
  out.k = k;
  if (sorted.front() == sorted.back()) {
    out.degenerate = true;
    for (const auto& [fips, v] : values) out.assignment[fips] = 0;
    return out;
  }
  const double last = static_cast<double>(sorted.size() - 1);
  for (std::size_t i = 1; i < k; ++i) {
    const double pos = last * static_cast<double>(i) / static_cast<double>(k);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double q = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    if (out.breakpoints.empty() || q > out.breakpoints.back()) out.breakpoints.push_back(q);
  }
  for (const auto& [fips, v] : values) {
    const auto it = std::lower_bound(out.breakpoints.begin(), out.breakpoints.end(), v);
    out.assignment[fips] = static_cast<std::size_t>(it - out.breakpoints.begin());
  }
  return out;
}

std::vector<std::size_t> histogram(const QuantileBinning& binning) {
  std::vector<std::size_t> counts(binning.bins(), 0);
  for (const auto& [fips, bin] : binning.assignment) {
    if (bin >= counts.size()) throw Error("county " + fips + " assigned to a missing bin");
    ++counts[bin];
  }
  return counts;
}

TrendLine trend_line(const CountyValues& x, const CountyValues& y) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [fips, xv] : x) {
    const auto it = y.find(fips);
    if (it == y.end()) continue;
    xs.push_back(xv);
    ys.push_back(it->second);
  }
  if (xs.size() < 2) {
    throw Error("trend line needs at least 2 common counties, got " + std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  TrendLine t;
  t.points = xs.size();
  t.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  t.intercept = my - t.slope * mx;
  if (sxx > 0.0 && syy > 0.0) {
    t.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  } else {
    t.degenerate = true;
  }
  return t;
}

nlohmann::json to_json(const QuantileBinning& binning) {
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [fips, bin] : binning.assignment) assignment[fips] = bin;
  return {{"k", binning.k},
          {"breakpoints", binning.breakpoints},
          {"assignment", std::move(assignment)},
          {"counts", histogram(binning)},
          {"degenerate", binning.degenerate}};
}

nlohmann::json to_json(const TrendLine& line) {
  return {{"slope", line.slope},
          {"intercept", line.intercept},
          {"r", line.r},
          {"degenerate", line.degenerate},
          {"points", line.points}};
}

}  // namespace geocon
