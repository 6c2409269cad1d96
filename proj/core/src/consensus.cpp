#include "geocon/consensus.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace geocon {

std::vector<double> rmse_per_county(const Tensor& pred, const Tensor& actual) {
  RmseAccumulator acc;
  acc.add(pred, actual);
  return acc.per_county();
}

void RmseAccumulator::add(const Tensor& pred, const Tensor& actual) {
  if (pred.shape() != actual.shape() || pred.rank() != 2) {
    throw ShapeError("rmse: prediction " + shape_string(pred.shape()) + " vs actual " +
                     shape_string(actual.shape()));
  }
  if (blocks_ == 0) {
    sq_ = Tensor(pred.shape(), 0.0);
  } else if (sq_.shape() != pred.shape()) {
    throw ShapeError("rmse: block shape changed to " + shape_string(pred.shape()));
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - actual[i];
    sq_[i] += e * e;
  }
  ++blocks_;
}

std::vector<double> RmseAccumulator::per_county() const {
  if (blocks_ == 0) throw Error("rmse over an empty test set");
  const std::size_t horizon = sq_.rows();
  const std::size_t n = sq_.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < horizon; ++k)
    for (std::size_t c = 0; c < n; ++c) out[c] += sq_(k, c);
  const double count = static_cast<double>(horizon * blocks_);
  for (double& v : out) v = std::sqrt(v / count);
  return out;
}

std::vector<std::vector<double>> RmseAccumulator::per_horizon() const {
  if (blocks_ == 0) throw Error("rmse over an empty test set");
  std::vector<std::vector<double>> out(sq_.rows(), std::vector<double>(sq_.cols()));
  for (std::size_t k = 0; k < sq_.rows(); ++k)
    for (std::size_t c = 0; c < sq_.cols(); ++c)
      out[k][c] = std::sqrt(sq_(k, c) / static_cast<double>(blocks_));
  return out;
}

namespace {

std::vector<double> differences(std::span<const double> baseline, std::span<const double> factor) {
  if (baseline.size() != factor.size()) {
    throw Error("paired samples differ in length (" + std::to_string(baseline.size()) + " vs " +
                std::to_string(factor.size()) + ")");
  }
  std::vector<double> d(baseline.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = baseline[i] - factor[i];
  return d;
}

}  // namespace

TestResult one_tailed_test(std::span<const double> baseline, std::span<const double> factor,
                           double alpha) {
  const std::vector<double> d = differences(baseline, factor);
  if (d.size() < 2) throw Error("one-tailed test needs at least 2 paired samples");
  const double n = static_cast<double>(d.size());
  TestResult r;
  r.n = d.size();
  r.mean_difference = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  double scale = 0.0;
  for (double v : d) {
    ss += (v - r.mean_difference) * (v - r.mean_difference);
    scale = std::max(scale, std::abs(v));
  }
  const double sd = std::sqrt(ss / (n - 1.0));

  if (scale == 0.0) {
    r.p_value = 1.0;
  } else if (sd <= 1e-12 * scale) {
    // Differences equal up to rounding.
    r.p_value = r.mean_difference > 0.0 ? 0.0 : 1.0;
  } else {
    const double t = r.mean_difference / (sd / std::sqrt(n));
    const boost::math::students_t dist(n - 1.0);
    r.p_value = boost::math::cdf(boost::math::complement(dist, t));
  }
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.significant = r.p_value < alpha;
  return r;
}

double permutation_oracle(std::span<const double> baseline, std::span<const double> factor,
                          std::size_t resamples, std::uint64_t seed) {
  const std::vector<double> d = differences(baseline, factor);
  const double n = static_cast<double>(d.size());
  if (d.empty() || resamples == 0) return 1.0;
  const double observed = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double scale = 0.0;
  for (double v : d) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * scale;

  std::mt19937_64 rng(seed);
  std::size_t at_least = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    double acc = 0.0;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (i % 64 == 0) bits = rng();
      acc += (bits & 1u) ? d[i] : -d[i];
      bits >>= 1;
    }
    if (acc / n >= observed - tol) ++at_least;
  }
  return (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(resamples));
}

VoteTable tally_votes(const std::vector<RunRecord>& records,
                      const std::vector<std::string>& county_order, const TallyOptions& options) {
  VoteTable table;
  table.alpha = options.alpha;
  const std::size_t N = county_order.size();

  // member index -> (name, run -> (baseline record, factor record))
  struct Pairing {
    std::string name;
    std::map<std::size_t, std::pair<const RunRecord*, const RunRecord*>> runs;
  };
  std::map<std::size_t, Pairing> members;
  for (const RunRecord& r : records) {
    if (table.state.empty()) {
      table.state = r.state;
      table.graph_kind = r.graph_kind;
    }
    if (table.factor.empty() && !r.factor.empty()) table.factor = r.factor;
    Pairing& p = members[r.member_index];
    p.name = r.model;
    auto& slot = p.runs[r.run];
    if (r.feature_set == kBaseline) {
      slot.first = &r;
    } else if (r.feature_set == kWithFactor) {
      slot.second = &r;
    } else {
      throw Error("unknown feature set '" + r.feature_set + "'");
    }
  }

  table.counties.resize(N);
  for (std::size_t c = 0; c < N; ++c) table.counties[c].fips = county_order[c];

  for (const auto& [index, p] : members) {
    table.members.push_back(p.name);
    std::vector<const RunRecord*> base;
    std::vector<const RunRecord*> fact;
    std::size_t incomplete = 0;
    for (const auto& [run, pair] : p.runs) {
      const bool ok = pair.first && pair.second && !pair.first->failed && !pair.second->failed;
      if (!ok) {
        ++incomplete;
        continue;
      }
      if (pair.first->rmse.size() != N || pair.second->rmse.size() != N) {
        throw Error("record for " + p.name + " run " + std::to_string(run) +
                    " does not cover the county order");
      }
      base.push_back(pair.first);
      fact.push_back(pair.second);
    }
    const bool abstain = base.size() < options.min_samples;
    if (incomplete > 0) {
      table.warnings.push_back(p.name + ": " + std::to_string(incomplete) +
                               " incomplete or failed run pair(s) excluded");
    }
    if (abstain) {
      table.warnings.push_back(p.name + ": only " + std::to_string(base.size()) +
                               " complete pairs; abstains");
    }
    std::vector<double> b(base.size());
    std::vector<double> f(fact.size());
    for (std::size_t c = 0; c < N; ++c) {
      ModelVote mv;
      mv.name = p.name;
      mv.samples = base.size();
      for (std::size_t i = 0; i < base.size(); ++i) {
        b[i] = base[i]->rmse[c];
        f[i] = fact[i]->rmse[c];
      }
      if (!base.empty()) {
        mv.rmse_baseline = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
        mv.rmse_factor = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
      }
      if (abstain) {
        mv.abstained = true;
      } else {
        const TestResult t = one_tailed_test(b, f, options.alpha);
        mv.p_value = t.p_value;
        mv.significant = t.significant;
      }
      CountyVotes& cv = table.counties[c];
      if (mv.significant) ++cv.votes;
      cv.models.push_back(std::move(mv));
    }
  }
  return table;
}

VoteAggregate aggregate_votes(const VoteTable& table) {
  VoteAggregate agg;
  std::size_t ceiling = table.members.size();
  for (const auto& c : table.counties) ceiling = std::max(ceiling, c.votes);
  agg.histogram.assign(ceiling + 1, 0);
  for (const auto& c : table.counties) {
    agg.total += c.votes;
    ++agg.histogram[c.votes];
  }
  return agg;
}

nlohmann::json to_json(const VoteTable& table) {
  nlohmann::json counties = nlohmann::json::array();
  for (const auto& c : table.counties) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : c.models) {
      models.push_back({{"name", m.name},
                        {"p", m.p_value},
                        {"significant", m.significant},
                        {"abstained", m.abstained},
                        {"n", m.samples},
                        {"rmse_base", m.rmse_baseline},
                        {"rmse_factor", m.rmse_factor}});
    }
    counties.push_back({{"fips", c.fips}, {"votes", c.votes}, {"models", std::move(models)}});
  }
  return {{"state", table.state},         {"factor", table.factor},
          {"graph_kind", to_string(table.graph_kind)},
          {"alpha", table.alpha},         {"members", table.members},
          {"counties", std::move(counties)}, {"warnings", table.warnings}};
}

VoteTable vote_table_from_json(const nlohmann::json& j) {
  VoteTable t;
  t.state = j.at("state").get<std::string>();
  t.factor = j.at("factor").get<std::string>();
  t.graph_kind = parse_graph_kind(j.at("graph_kind").get<std::string>());
  t.alpha = j.at("alpha").get<double>();
  if (j.contains("members")) t.members = j.at("members").get<std::vector<std::string>>();
  if (j.contains("warnings")) t.warnings = j.at("warnings").get<std::vector<std::string>>();
  for (const auto& cj : j.at("counties")) {
    CountyVotes c;
    c.fips = cj.at("fips").get<std::string>();
    c.votes = cj.at("votes").get<std::size_t>();
    for (const auto& mj : cj.at("models")) {
      ModelVote m;
      m.name = mj.at("name").get<std::string>();
      m.p_value = mj.at("p").get<double>();
      m.significant = mj.at("significant").get<bool>();
      m.abstained = mj.value("abstained", false);
      m.samples = mj.value("n", std::size_t{0});
      m.rmse_baseline = mj.at("rmse_base").get<double>();
      m.rmse_factor = mj.at("rmse_factor").get<double>();
      c.models.push_back(std::move(m));
    }
    t.counties.push_back(std::move(c));
  }
  return t;
}

nlohmann::json to_json(const VoteAggregate& aggregate) {
  return {{"total", aggregate.total}, {"histogram", aggregate.histogram}};
}

}  // namespace geocon
