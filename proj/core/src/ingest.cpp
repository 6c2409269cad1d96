#include "geocon/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>

#include "csv.hpp"

namespace geocon {
namespace {

constexpr std::string_view kSeriesHeader = "fips,date,variable,value,population";

struct PendingRow {
  Date date;
  std::optional<double> value;
};

struct PendingSeries {
  std::vector<PendingRow> rows;
  std::optional<std::int64_t> population;
};

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

bool is_clinical(const std::string& variable) {
  return variable == vars::kHospitalizations || variable == vars::kDeaths;
}

bool valid_fips(std::string_view fips) {
  return fips.size() == 5 &&
         std::all_of(fips.begin(), fips.end(), [](char c) { return c >= '0' && c <= '9'; });
}

LoadedSeries load_series(std::istream& in) {
  LoadedSeries result;
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kSeriesHeader) {
    throw IngestError("series CSV must start with header '" + std::string(kSeriesHeader) + "'");
  }

  std::map<std::pair<std::string, std::string>, PendingSeries> pending;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_record(line);
    const auto reject = [&](std::string why) {
      result.rejected.push_back({lineno, "line " + std::to_string(lineno) + ": " + why});
    };
    if (fields.size() != 5) {
      reject("expected 5 fields, found " + std::to_string(fields.size()));
      continue;
    }
    const std::string fips(detail::trim(fields[0]));
    if (!valid_fips(fips)) {
      reject("malformed FIPS '" + fips + "'");
      continue;
    }
    Date date;
    try {
      date = parse_date(detail::trim(fields[1]));
    } catch (const Error& e) {
      reject(e.what());
      continue;
    }
    const std::string variable(detail::trim(fields[2]));
    if (variable.empty()) {
      reject("empty variable name");
      continue;
    }
    std::optional<double> value;
    if (const auto v = detail::trim(fields[3]); !v.empty()) {
      value = parse_double(v);
      if (!value) {
        reject("value '" + std::string(v) + "' is not a finite number");
        continue;
      }
    }
    std::optional<std::int64_t> population;
    if (const auto p = detail::trim(fields[4]); !p.empty()) {
      population = parse_int(p);
      if (!population) {
        reject("population '" + std::string(p) + "' is not an integer");
        continue;
      }
    }

    PendingSeries& s = pending[{fips, variable}];
    if (!s.rows.empty()) {
      const Date prev = s.rows.back().date;
      if (date == prev) {
        throw IngestError("line " + std::to_string(lineno) + ": duplicate row for (" + fips +
                          ", " + variable + ", " + format_date(date) + ")");
      }
      if (date < prev) {
        throw IngestError("line " + std::to_string(lineno) + ": dates go backwards for (" +
                          fips + ", " + variable + "): " + format_date(date) + " after " +
                          format_date(prev));
      }
    }
    s.rows.push_back({date, value});
    if (population && !s.population) s.population = population;
  }

  for (auto& [key, s] : pending) {
    CountySeries cs;
    cs.fips = key.first;
    cs.variable = key.second;
    cs.start = s.rows.front().date;
    cs.population = s.population;
    const auto span = static_cast<std::size_t>((s.rows.back().date - cs.start).count()) + 1;
    cs.values.assign(span, std::nullopt);
    for (const PendingRow& r : s.rows) {
      cs.values[static_cast<std::size_t>((r.date - cs.start).count())] = r.value;
    }
    if (is_clinical(cs.variable) && cs.population && *cs.population <= 0) {
      throw IngestError("non-positive population for clinical series (" + cs.fips + ", " +
                        cs.variable + ")");
    }
    result.series.push_back(std::move(cs));
  }
  return result;
}

LoadedSeries load_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open series file " + path.string());
  return load_series(in);
}

CountySeries per_100k(const CountySeries& series) {
  if (!series.population || *series.population <= 0) {
    throw IngestError("county " + series.fips + " has no positive population for '" +
                      series.variable + "'");
  }
  CountySeries out = series;
  const double scale = 100000.0 / static_cast<double>(*series.population);
  for (auto& v : out.values) {
    if (v) *v *= scale;
  }
  out.variable += vars::kPer100kSuffix;
  return out;
}

std::size_t FeaturePanel::county_index(const std::string& fips) const {
  const auto it = std::find(county_order.begin(), county_order.end(), fips);
  if (it == county_order.end()) throw Error("county " + fips + " not in panel");
  return static_cast<std::size_t>(it - county_order.begin());
}

std::size_t FeaturePanel::variable_index(const std::string& variable) const {
  const auto it = std::find(variable_order.begin(), variable_order.end(), variable);
  if (it == variable_order.end()) throw Error("variable '" + variable + "' not in panel");
  return static_cast<std::size_t>(it - variable_order.begin());
}

bool FeaturePanel::has_variable(const std::string& variable) const {
  return std::find(variable_order.begin(), variable_order.end(), variable) !=
         variable_order.end();
}

bool FeaturePanel::is_imputed(std::size_t t, std::size_t n, std::size_t f) const {
  return imputed[(t * counties() + n) * features() + f] != 0;
}

std::size_t FeaturePanel::imputed_count() const {
  return static_cast<std::size_t>(std::count(imputed.begin(), imputed.end(), std::uint8_t{1}));
}

FeaturePanel align_panel(const std::vector<CountySeries>& series, const DateRange& range,
                         ImputePolicy impute, const std::vector<std::string>& variable_order) {
  (void)impute;  // single policy today
  std::set<std::string> counties;
  std::set<std::string> variables;
  std::map<std::pair<std::string, std::string>, const CountySeries*> lookup;
  for (const auto& s : series) {
    counties.insert(s.fips);
    variables.insert(s.variable);
    if (!lookup.emplace(std::pair{s.fips, s.variable}, &s).second) {
      throw IngestError("two series for (" + s.fips + ", " + s.variable + ")");
    }
  }

  FeaturePanel panel;
  panel.range = range;
  panel.county_order.assign(counties.begin(), counties.end());
  if (variable_order.empty()) {
    panel.variable_order.assign(variables.begin(), variables.end());
  } else {
    panel.variable_order = variable_order;
    std::set<std::string> seen;
    for (const auto& v : variable_order) {
      if (!seen.insert(v).second) throw IngestError("variable '" + v + "' listed twice");
    }
  }

  const std::size_t T = range.days();
  const std::size_t N = panel.county_order.size();
  const std::size_t F = panel.variable_order.size();
  if (T == 0 || N == 0 || F == 0) {
    throw IngestError("empty panel: " + std::to_string(T) + " days, " + std::to_string(N) +
                      " counties, " + std::to_string(F) + " variables");
  }
  panel.data = Tensor(Shape{T, N, F}, 0.0);
  panel.imputed.assign(T * N * F, 0);

  std::vector<std::string> missing;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) {
      const auto it = lookup.find({panel.county_order[n], panel.variable_order[f]});
      bool any = false;
      std::optional<double> last;
      for (std::size_t t = 0; t < T; ++t) {
        std::optional<double> v;
        if (it != lookup.end()) {
          const CountySeries& s = *it->second;
          const auto off = (range.at(t) - s.start).count();
          if (off >= 0 && static_cast<std::size_t>(off) < s.values.size()) {
            v = s.values[static_cast<std::size_t>(off)];
          }
        }
        const std::size_t flat = (t * N + n) * F + f;
        if (v) {
          any = true;
          last = v;
          panel.data[flat] = *v;
        } else {
          panel.imputed[flat] = 1;
          panel.data[flat] = last.value_or(0.0);
        }
      }
      if (!any) missing.push_back("(" + panel.county_order[n] + ", " + panel.variable_order[f] + ")");
    }
  }
  if (!missing.empty()) {
    std::string msg = "no data in range for:";
    for (const auto& m : missing) msg += " " + m;
    throw IngestError(msg);
  }
  return panel;
}

ScaledPanel zscore(const FeaturePanel& panel, IndexRange fit_range) {
  if (fit_range.empty() || fit_range.end > panel.timesteps()) {
    throw Error("zscore fit range [" + std::to_string(fit_range.begin) + ", " +
                std::to_string(fit_range.end) + ") is empty or outside the panel");
  }
  const std::size_t N = panel.counties();
  const std::size_t F = panel.features();
  ScaledPanel out{panel, std::vector<ScalingStats>(F)};
  const double count = static_cast<double>(fit_range.size() * N);
  for (std::size_t f = 0; f < F; ++f) {
    double mean = 0.0;
    for (std::size_t t = fit_range.begin; t < fit_range.end; ++t)
      for (std::size_t n = 0; n < N; ++n) mean += panel.value(t, n, f);
    mean /= count;
    double ss = 0.0;
    for (std::size_t t = fit_range.begin; t < fit_range.end; ++t)
      for (std::size_t n = 0; n < N; ++n) {
        const double d = panel.value(t, n, f) - mean;
        ss += d * d;
      }
    const double sd = std::sqrt(ss / count);
    ScalingStats& st = out.stats[f];
    st.mean = mean;
    // Relative cutoff: variance that is only accumulated rounding counts as zero.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      st.stddev = 1.0;
      st.mean = 0.0;
      st.degenerate = true;
      continue;
    }
    st.stddev = sd;
    for (std::size_t t = 0; t < panel.timesteps(); ++t)
      for (std::size_t n = 0; n < N; ++n) {
        double& v = out.panel.data.at(t, n, f);
        v = (v - mean) / sd;
      }
  }
  return out;
}

FeaturePanel inverse_zscore(const FeaturePanel& panel, const std::vector<ScalingStats>& stats) {
  if (stats.size() != panel.features()) throw Error("scaling stats do not match panel variables");
  FeaturePanel out = panel;
  for (std::size_t f = 0; f < stats.size(); ++f) {
    if (stats[f].degenerate) continue;
    for (std::size_t t = 0; t < panel.timesteps(); ++t)
      for (std::size_t n = 0; n < panel.counties(); ++n) {
        double& v = out.data.at(t, n, f);
        v = v * stats[f].stddev + stats[f].mean;
      }
  }
  return out;
}

FeaturePanel select_variables(const FeaturePanel& panel,
                              const std::vector<std::string>& variables) {
  std::vector<std::size_t> idx;
  for (const auto& v : variables) idx.push_back(panel.variable_index(v));
  const std::size_t T = panel.timesteps();
  const std::size_t N = panel.counties();
  const std::size_t F = idx.size();
  FeaturePanel out;
  out.county_order = panel.county_order;
  out.variable_order = variables;
  out.range = panel.range;
  out.data = Tensor(Shape{T, N, F});
  out.imputed.assign(T * N * F, 0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t f = 0; f < F; ++f) {
        out.data.at(t, n, f) = panel.value(t, n, idx[f]);
        out.imputed[(t * N + n) * F + f] = panel.is_imputed(t, n, idx[f]) ? 1 : 0;
      }
  return out;
}

}  // namespace geocon
