#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "geocon/dates.hpp"
#include "geocon/experiment.hpp"
#include "geocon/graphs.hpp"

namespace geocon {

/// Reported as "<file>: <field>: <message>".
class ConfigError : public Error {
 public:
  ConfigError(const std::string& file, const std::string& field, const std::string& message)
      : Error(file + ": " + field + ": " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct PipelineConfig {
  std::filesystem::path source;  // the config file, for diagnostics
  std::string state;             // two-digit state code

  std::filesystem::path series;     // daily-series CSV
  std::filesystem::path adjacency;  // census adjacency records
  std::filesystem::path socio;      // socioeconomic index CSV

  DateRange window{};
  bool per100k = true;  // convert clinical variables to rates
  std::string target = "hospitalizations";
  std::vector<std::string> baseline_features;  // raw ids; defaults to {target}
  std::vector<std::string> factors;

  std::vector<GraphKind> graph_kinds{GraphKind::Socioeconomic};
  SocioRule socio_rule = TopK{4};
  SocioScaling socio_scaling = SocioScaling::ZScore;

  EnsembleConfig ensemble;
  std::size_t runs = 10;
  std::size_t epochs = 150;
  AmsGradConfig optimizer;
  std::uint64_t seed = 42;
  std::size_t jobs = 1;

  std::vector<double> alphas{0.1};
  std::size_t min_samples = 4;
  std::size_t bins = 5;

  /// Panel id of a raw variable after optional per-100k conversion.
  std::string panel_variable(const std::string& raw) const;
  std::string target_variable() const { return panel_variable(target); }
  std::vector<std::string> baseline_variables() const;

  /// Experiment settings for one (factor, graph kind) sweep.
  ExperimentConfig experiment(const std::string& factor, GraphKind kind) const;
};

/// Parses a JSON config; relative input paths resolve against the config's
/// directory. Unknown keys are rejected.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& source);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& config);

/// Stable text form of a significance level ("0.1", "0.05").
std::string format_alpha(double alpha);

}  // namespace geocon
