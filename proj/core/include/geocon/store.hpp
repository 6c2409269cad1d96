#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "geocon/consensus.hpp"
#include "geocon/graphs.hpp"
#include "geocon/pipeline.hpp"

namespace geocon {

struct VoteKey {
  std::string factor;
  GraphKind kind = GraphKind::Socioeconomic;
  double alpha = 0.1;

  friend auto operator<=>(const VoteKey& a, const VoteKey& b) {
    return std::tie(a.factor, a.kind, a.alpha) <=> std::tie(b.factor, b.kind, b.alpha);
  }
  friend bool operator==(const VoteKey&, const VoteKey&) = default;
};

struct CountyInfo {
  std::string fips;
  std::string name;
  std::optional<std::int64_t> population;
};

struct StateResults {
  StoredPanel stored;
  std::vector<CountyInfo> counties;  // panel county order
  std::map<GraphKind, CountyGraph> graphs;
  std::optional<DistanceMatrix> distances;
  std::map<VoteKey, VoteTable> votes;
  /// variable -> county-mean over the panel window, panel county order
  std::map<std::string, std::vector<double>> means;
};

/// Immutable view of an output directory: one sub-directory per state.
class ResultStore {
 public:
  ResultStore() = default;
  /// Loads every `<dir>/<state>/panel.json` and the artifacts beside it.
  /// Vote tables whose counties are not in the panel throw.
  static ResultStore load(const std::filesystem::path& dir);

  void add(std::string state, StateResults results);
  const std::map<std::string, StateResults>& states() const noexcept { return states_; }
  const StateResults* find(const std::string& state) const;

 private:
  std::map<std::string, StateResults> states_;
};

}  // namespace geocon
