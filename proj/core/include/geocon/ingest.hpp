#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geocon/dates.hpp"
#include "geocon/tensor.hpp"

namespace geocon {

class IngestError : public Error {
 public:
  using Error::Error;
};

namespace vars {
inline constexpr const char* kHospitalizations = "hospitalizations";
inline constexpr const char* kDeaths = "deaths";
inline constexpr const char* kTemperature = "temperature";
inline constexpr const char* kRelativeHumidity = "relative_humidity";
inline constexpr const char* kAod = "aod";
inline constexpr const char* kPer100kSuffix = "_per100k";
}  // namespace vars

/// Clinical variables are counts that need a population for rate conversion.
bool is_clinical(const std::string& variable);
/// True for a 5-digit, all-numeric county code.
bool valid_fips(std::string_view fips);
inline std::string state_of(const std::string& fips) { return fips.substr(0, 2); }

/// One county's daily series for one variable. values[i] is day start + i;
/// std::nullopt marks a missing day.
struct CountySeries {
  std::string fips;
  std::string variable;
  Date start;
  std::vector<std::optional<double>> values;
  std::optional<std::int64_t> population;

  std::size_t days() const { return values.size(); }
  Date end() const { return start + std::chrono::days(values.size() - 1); }
};

struct RowDiagnostic {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

struct LoadedSeries {
  std::vector<CountySeries> series;
  std::vector<RowDiagnostic> rejected;
};

/// Reads the `fips,date,variable,value,population` CSV. Rows with a malformed
/// FIPS are rejected with a diagnostic; dates going backwards within one
/// (fips, variable) and repeated (fips, variable, date) rows throw IngestError.
LoadedSeries load_series(std::istream& in);
LoadedSeries load_series(const std::filesystem::path& path);

/// Rate per 100k residents; variable id gains the "_per100k" suffix.
CountySeries per_100k(const CountySeries& series);

/// Aligned T x N x F node-feature array.
struct FeaturePanel {
  std::vector<std::string> county_order;
  std::vector<std::string> variable_order;
  DateRange range;
  Tensor data;                  // T x N x F
  std::vector<std::uint8_t> imputed;  // same layout as data; 1 = filled in

  std::size_t timesteps() const { return data.shape().at(0); }
  std::size_t counties() const { return data.shape().at(1); }
  std::size_t features() const { return data.shape().at(2); }
  /// Index of the last timestamp (T - 1).
  std::size_t last_index() const { return timesteps() - 1; }

  std::size_t county_index(const std::string& fips) const;
  std::size_t variable_index(const std::string& variable) const;
  bool has_variable(const std::string& variable) const;
  double value(std::size_t t, std::size_t n, std::size_t f) const { return data.at(t, n, f); }
  bool is_imputed(std::size_t t, std::size_t n, std::size_t f) const;
  std::size_t imputed_count() const;
};

enum class ImputePolicy {
  /// Interior gaps take the previous day's value; leading gaps are zero.
  ForwardFillZeroLead,
};

/// Builds the panel over `range`. Counties are ordered by ascending FIPS;
/// variables follow `variable_order` when given, otherwise ascending id.
/// Throws IngestError listing every (fips, variable) pair with no data in range.
FeaturePanel align_panel(const std::vector<CountySeries>& series, const DateRange& range,
                         ImputePolicy impute = ImputePolicy::ForwardFillZeroLead,
                         const std::vector<std::string>& variable_order = {});

struct ScalingStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool degenerate = false;  // zero variance: left unscaled
};

struct ScaledPanel {
  FeaturePanel panel;
  std::vector<ScalingStats> stats;  // one per variable
};

/// Per-variable z-score with statistics from timestamps in `fit_range` only
/// (population standard deviation, all counties pooled).
ScaledPanel zscore(const FeaturePanel& panel, IndexRange fit_range);
FeaturePanel inverse_zscore(const FeaturePanel& panel, const std::vector<ScalingStats>& stats);

/// Sub-panel keeping the listed variables in the given order.
FeaturePanel select_variables(const FeaturePanel& panel, const std::vector<std::string>& variables);

}  // namespace geocon
