#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "geocon/tensor.hpp"
#include "geocon/viz_stats.hpp"

using namespace geocon;

namespace {

CountyValues values(const std::vector<double>& v) {
  CountyValues out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    out[buf] = v[i];
  }
  return out;
}

}  // namespace

TEST(QuantileBins, OneToHundredInFifths) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
  const QuantileBinning b = quantile_bins(values(v), 5);
  EXPECT_EQ(b.bins(), 5u);
  EXPECT_EQ(histogram(b), (std::vector<std::size_t>(5, 20)));
}

TEST(QuantileBins, AllEqualIsDegenerate) {
  const QuantileBinning b = quantile_bins(values({3, 3, 3, 3}), 5);
  EXPECT_TRUE(b.degenerate);
  EXPECT_EQ(b.bins(), 1u);
  EXPECT_EQ(histogram(b), (std::vector<std::size_t>{4}));
  EXPECT_THROW(quantile_bins({}, 5), Error);
  EXPECT_THROW(quantile_bins(values({1, 2}), 1), Error);
}

TEST(QuantileBins, DistinctValuesMatchRankOracle) {
  // For distinct values at sorted rank r (0-based), breakpoint i sits in
  // [x_floor(pos), x_floor(pos)+1) with pos = (n-1)i/k, so
  // bin(r) = #{i in 1..k-1 : r > floor((n-1)i/k)}.
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    const std::size_t k = 2 + rng() % 6;
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    const CountyValues cv = values(v);
    const QuantileBinning b = quantile_bins(cv, k);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [fips, x] : cv) {
      const auto r = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x) -
                                              sorted.begin());
      std::size_t expect = 0;
      for (std::size_t i = 1; i < k; ++i)
        if (r > (n - 1) * i / k) ++expect;
      // merged duplicate breakpoints can only lower the index
      EXPECT_LE(b.assignment.at(fips), expect);
      if (b.bins() == k) EXPECT_EQ(b.assignment.at(fips), expect) << n << " " << k;
    }
  }
}

TEST(QuantileBins, AssignmentIsMonotoneAndBreakpointsAscending) {
  std::mt19937_64 rng(72);
  std::uniform_int_distribution<int> u(0, 6);  // many ties
  std::vector<double> v(50);
  for (double& x : v) x = u(rng);
  const CountyValues cv = values(v);
  const QuantileBinning b = quantile_bins(cv, 5);
  EXPECT_TRUE(std::is_sorted(b.breakpoints.begin(), b.breakpoints.end()));
  EXPECT_EQ(std::adjacent_find(b.breakpoints.begin(), b.breakpoints.end()), b.breakpoints.end());
  for (const auto& [f1, x1] : cv)
    for (const auto& [f2, x2] : cv)
      if (x1 <= x2) EXPECT_LE(b.assignment.at(f1), b.assignment.at(f2));
  std::size_t total = 0;
  for (std::size_t c : histogram(b)) total += c;
  EXPECT_EQ(total, 50u);
  const auto j = to_json(b);
  EXPECT_EQ(j.at("counts").size(), b.bins());
}

TEST(Trend, ExactLineAndNormalEquations) {
  const TrendLine exact = trend_line(values({0, 1, 2, 3}), values({1, 3, 5, 7}));
  EXPECT_NEAR(exact.slope, 2.0, 1e-12);
  EXPECT_NEAR(exact.intercept, 1.0, 1e-12);
  EXPECT_NEAR(exact.r, 1.0, 1e-12);

  std::mt19937_64 rng(73);
  std::normal_distribution<double> z(0, 1);
  std::vector<double> x(40), y(40);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = z(rng);
    y[i] = -0.7 * x[i] + 0.3 + 0.5 * z(rng);
  }
  const TrendLine t = trend_line(values(x), values(y));
  // residuals orthogonal to 1 and x
  double s1 = 0, sx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (t.slope * x[i] + t.intercept);
    s1 += e;
    sx += e * x[i];
  }
  EXPECT_NEAR(s1, 0.0, 1e-9);
  EXPECT_NEAR(sx, 0.0, 1e-9);
  EXPECT_EQ(t.points, 40u);
  // r is invariant to positive affine maps of either axis
  std::vector<double> x2 = x;
  for (double& v : x2) v = 3 * v + 10;
  EXPECT_NEAR(trend_line(values(x2), values(y)).r, t.r, 1e-12);
  EXPECT_NEAR(trend_line(values(y), values(x)).r, t.r, 1e-12);
}

TEST(Trend, DegenerateAndMissing) {
  const TrendLine c = trend_line(values({1, 2, 3}), values({4, 4, 4}));
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.r, 0.0);
  EXPECT_EQ(c.slope, 0.0);
  EXPECT_DOUBLE_EQ(c.intercept, 4.0);
  CountyValues a{{"1", 1.0}, {"2", 2.0}}, b{{"2", 5.0}, {"3", 1.0}};
  EXPECT_THROW(trend_line(a, b), Error);
}
