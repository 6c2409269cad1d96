#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "geocon/graphs.hpp"
#include "geocon/ingest.hpp"
#include "geocon/models.hpp"
#include "geocon/train.hpp"

namespace geocon {

inline constexpr const char* kBaseline = "baseline";
inline constexpr const char* kWithFactor = "with_factor";

/// Outcome of one (member, run, feature set) training.
struct RunRecord {
  std::string state;
  std::string model;
  std::size_t member_index = 0;
  std::size_t run = 0;
  std::string feature_set;  // kBaseline or kWithFactor
  std::string factor;
  GraphKind graph_kind = GraphKind::Socioeconomic;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::vector<double> rmse;                          // per county
  std::vector<std::vector<double>> rmse_by_horizon;  // [horizon][county]
  std::vector<double> loss_curve;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Identity used for resumption and canonical ordering.
struct RunKey {
  std::size_t member_index = 0;
  std::size_t run = 0;
  std::string feature_set;
  std::uint64_t seed = 0;

  friend auto operator<=>(const RunKey&, const RunKey&) = default;
};

RunKey key_of(const RunRecord& r);

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

/// One JSON object per line.
void write_records(std::ostream& out, const std::vector<RunRecord>& records);
/// Reads line-delimited records; a truncated final line (interrupted
/// write) is ignored, any other malformed line throws.
std::vector<RunRecord> read_records(std::istream& in);
std::vector<RunRecord> read_records(const std::filesystem::path& path);

struct ExperimentConfig {
  std::string state;
  GraphKind graph_kind = GraphKind::Socioeconomic;
  std::string target;                        // target channel id in the panel
  std::vector<std::string> baseline_features;  // must include the target
  std::string factor;                        // appended for with_factor runs
  EnsembleConfig ensemble;
  std::size_t runs = 10;
  std::size_t epochs = 150;
  AmsGradConfig optimizer;
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
};

/// Seed shared by the baseline and with_factor trainings of (member, run).
std::uint64_t run_seed(std::uint64_t base, std::size_t member_index, std::size_t run);

/// Raw (unscaled) panel and the graph aligned to its county order.
struct ExperimentData {
  FeaturePanel panel;
  CountyGraph graph;
};

using RecordSink = std::function<void(const RunRecord&)>;

/// Trains every roster member x run x {baseline, with_factor}. Keys already
/// present in `completed` are not retrained; `sink` sees each new record as
/// it finishes (called under a lock). Returns completed + new records in
/// canonical (member, run, feature set) order.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                      const std::vector<RunRecord>& completed = {},
                                      const RecordSink& sink = {});

/// Canonical ordering by (member_index, run, feature_set).
void sort_records(std::vector<RunRecord>& records);

}  // namespace geocon
