#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "geocon/experiment.hpp"
#include "geocon/tensor.hpp"

namespace geocon {

/// Per-county RMSE for one omega x N forecast block.
std::vector<double> rmse_per_county(const Tensor& pred, const Tensor& actual);

/// Pools squared errors over many forecast blocks (test windows).
class RmseAccumulator {
 public:
  void add(const Tensor& pred, const Tensor& actual);
  std::vector<double> per_county() const;
  /// [horizon][county]
  std::vector<std::vector<double>> per_horizon() const;
  std::size_t blocks() const noexcept { return blocks_; }

 private:
  Tensor sq_;  // omega x N running sums of squared error
  std::size_t blocks_ = 0;
};

struct TestResult {
  double p_value = 1.0;
  bool significant = false;
  double mean_difference = 0.0;
  std::size_t n = 0;
};

/// Paired one-sided t-test of H1: mean(baseline - factor) > 0, n-1 degrees
/// of freedom; significant iff p < alpha. All-zero differences give p = 1;
/// zero variance gives p = 0 for a positive mean and p = 1 otherwise.
TestResult one_tailed_test(std::span<const double> baseline, std::span<const double> factor,
                           double alpha);

/// Sign-flip permutation p-value for the same hypothesis: the fraction of
/// resampled means >= the observed mean, with add-one smoothing.
double permutation_oracle(std::span<const double> baseline, std::span<const double> factor,
                          std::size_t resamples, std::uint64_t seed);

struct ModelVote {
  std::string name;
  double p_value = 1.0;
  bool significant = false;
  bool abstained = false;
  std::size_t samples = 0;
  double rmse_baseline = 0.0;  // mean over runs
  double rmse_factor = 0.0;
};

struct CountyVotes {
  std::string fips;
  std::size_t votes = 0;
  std::vector<ModelVote> models;
};

struct VoteTable {
  std::string state;
  std::string factor;
  GraphKind graph_kind = GraphKind::Socioeconomic;
  double alpha = 0.1;
  std::vector<std::string> members;  // roster order; the vote ceiling is members.size()
  std::vector<CountyVotes> counties;
  std::vector<std::string> warnings;
};

struct TallyOptions {
  double alpha = 0.1;
  /// Members with fewer complete pairs abstain.
  std::size_t min_samples = 4;
};

VoteTable tally_votes(const std::vector<RunRecord>& records,
                      const std::vector<std::string>& county_order, const TallyOptions& options);

struct VoteAggregate {
  std::size_t total = 0;
  std::vector<std::size_t> histogram;  // index = vote count, 0..M
};

VoteAggregate aggregate_votes(const VoteTable& table);

nlohmann::json to_json(const VoteTable& table);
VoteTable vote_table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VoteAggregate& aggregate);

}  // namespace geocon
