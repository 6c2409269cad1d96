#include "geocon/store.hpp"

#include <algorithm>

namespace geocon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::map<std::string, std::vector<double>> county_means(const FeaturePanel& p) {
  std::map<std::string, std::vector<double>> out;
  for (std::size_t f = 0; f < p.features(); ++f) {
    std::vector<double> m(p.counties(), 0.0);
    for (std::size_t t = 0; t < p.timesteps(); ++t)
      for (std::size_t n = 0; n < p.counties(); ++n) m[n] += p.value(t, n, f);
    for (double& v : m) v /= static_cast<double>(p.timesteps());
    out[p.variable_order[f]] = std::move(m);
  }
  return out;
}

StateResults load_state(const fs::path& dir) {
  StateResults r;
  r.stored = load_panel(dir / "panel.json");
  const auto& order = r.stored.panel.county_order;
  r.means = county_means(r.stored.panel);

  std::map<std::string, CountyInfo> info;
  if (fs::exists(dir / "counties.json")) {
    for (const auto& c : read_json(dir / "counties.json")) {
      CountyInfo ci;
      ci.fips = c.at("fips").get<std::string>();
      ci.name = c.value("name", "");
      if (c.contains("population") && !c.at("population").is_null()) {
        ci.population = c.at("population").get<std::int64_t>();
      }
      info[ci.fips] = ci;
    }
  }
  for (const auto& fips : order) {
    auto it = info.find(fips);
    CountyInfo ci = it != info.end() ? it->second : CountyInfo{fips, "", std::nullopt};
    if (!ci.population) {
      const auto p = r.stored.population.find(fips);
      if (p != r.stored.population.end()) ci.population = p->second;
    }
    r.counties.push_back(std::move(ci));
  }

  for (GraphKind kind : {GraphKind::Border, GraphKind::Socioeconomic}) {
    const fs::path g = dir / ("graph_" + to_string(kind) + ".json");
    if (fs::exists(g)) r.graphs.emplace(kind, reorder(graph_from_json(read_json(g)), order));
  }
  if (fs::exists(dir / "socio_distance.json")) {
    r.distances = distance_matrix_from_json(read_json(dir / "socio_distance.json"));
    if (r.distances->nodes != order) throw Error("socio distance matrix does not follow the panel order");
  }

  if (fs::exists(dir / "votes")) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / "votes")) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      VoteTable t = vote_table_from_json(read_json(f));
      for (const auto& c : t.counties) {
        if (std::find(order.begin(), order.end(), c.fips) == order.end()) {
          throw Error(f.string() + ": county " + c.fips + " is not in the panel");
        }
      }
      VoteKey key{t.factor, t.graph_kind, t.alpha};
      r.votes.emplace(std::move(key), std::move(t));
    }
  }
  return r;
}

}  // namespace

ResultStore ResultStore::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("data directory " + dir.string() + " does not exist");
  ResultStore store;
  std::vector<fs::path> states;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "panel.json")) states.push_back(e.path());
  }
  std::sort(states.begin(), states.end());
  for (const auto& s : states) store.add(s.filename().string(), load_state(s));
  return store;
}

void ResultStore::add(std::string state, StateResults results) {
  states_.insert_or_assign(std::move(state), std::move(results));
}

const StateResults* ResultStore::find(const std::string& state) const {
  const auto it = states_.find(state);
  return it == states_.end() ? nullptr : &it->second;
}

}  // namespace geocon
