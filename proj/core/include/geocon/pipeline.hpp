#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "geocon/config.hpp"
#include "geocon/ingest.hpp"
#include "geocon/synth.hpp"

namespace geocon {

using Logger = std::function<void(const std::string&)>;

/// Artifact layout of one state under the output directory.
class StateArtifacts {
 public:
  StateArtifacts(const std::filesystem::path& out, const std::string& state)
      : root_(out / state) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path panel() const { return root_ / "panel.json"; }
  std::filesystem::path ingest_report() const { return root_ / "ingest_report.json"; }
  std::filesystem::path counties() const { return root_ / "counties.json"; }
  std::filesystem::path graph(GraphKind kind) const;
  std::filesystem::path centrality(GraphKind kind) const;
  std::filesystem::path socio_distances() const { return root_ / "socio_distance.json"; }
  std::filesystem::path runs(const std::string& factor, GraphKind kind) const;
  std::filesystem::path votes(const std::string& factor, GraphKind kind, double alpha) const;

 private:
  std::filesystem::path root_;
};

/// Raw panel plus county populations, as persisted by `ingest`.
struct StoredPanel {
  std::string state;
  FeaturePanel panel;
  std::map<std::string, std::int64_t> population;
};

nlohmann::json to_json(const StoredPanel& stored);
StoredPanel stored_panel_from_json(const nlohmann::json& j);
StoredPanel load_panel(const std::filesystem::path& path);

/// Writes `text` via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

void run_ingest(const PipelineConfig& config, const std::filesystem::path& out, const Logger& log);
void run_graph(const PipelineConfig& config, const std::filesystem::path& out, const Logger& log);

struct TrainStageOptions {
  /// Simulated interruption: abort after this many new records are written.
  std::size_t stop_after = std::numeric_limits<std::size_t>::max();
};

/// Thrown when `stop_after` is reached.
class Interrupted : public Error {
 public:
  using Error::Error;
};

/// Trains every (factor, graph kind) sweep. Completed records found in the
/// runs files are kept; the files are rewritten in canonical order.
void run_train(const PipelineConfig& config, const std::filesystem::path& out, const Logger& log,
               const TrainStageOptions& options = {});
void run_vote(const PipelineConfig& config, const std::filesystem::path& out, const Logger& log);

/// Synthesizes a small state under out/inputs and runs every stage on it.
PipelineConfig run_demo(const std::filesystem::path& out, std::uint64_t seed, std::size_t jobs,
                        const Logger& log);

}  // namespace geocon
