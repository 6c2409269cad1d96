#include "geocon/graphs.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "csv.hpp"
#include "geocon/ingest.hpp"

namespace geocon {

std::string to_string(GraphKind kind) {
  return kind == GraphKind::Border ? "border" : "socio";
}

GraphKind parse_graph_kind(const std::string& text) {
  if (text == "border") return GraphKind::Border;
  if (text == "socio" || text == "socioeconomic") return GraphKind::Socioeconomic;
  throw GraphError("unknown graph kind '" + text + "' (expected border or socio)");
}

void normalize_edges(std::vector<Edge>& edges) {
  for (Edge& e : edges) {
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::erase_if(edges, [](const Edge& e) { return e.u == e.v; });
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; }),
              edges.end());
}

std::vector<std::size_t> CountyGraph::degrees() const {
  std::vector<std::size_t> deg(nodes.size(), 0);
  for (const Edge& e : edges) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

nd::Adjacency CountyGraph::adjacency() const {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(edges.size());
  for (const Edge& e : edges) pairs.emplace_back(e.u, e.v);
  return nd::Adjacency::from_edges(nodes.size(), pairs);
}

BorderGraphResult build_border_graph(std::istream& in, const std::string& state,
                                     const std::vector<std::string>& panel_counties) {
  BorderGraphResult result;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::set<std::string> file_counties;
  std::string line;
  std::string cur_name;
  std::string cur_fips;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_record(line, '|');
    if (fields.size() != 4) {
      throw GraphError("adjacency line " + std::to_string(lineno) + ": expected 4 fields");
    }
    for (auto& f : fields) f = std::string(detail::trim(f));
    if (!fields[1].empty()) {
      cur_name = fields[0];
      cur_fips = fields[1];
    }
    const std::string& nb_name = fields[2];
    const std::string& nb_fips = fields[3];
    for (const std::string* f : std::array<const std::string*, 2>{&cur_fips, &nb_fips}) {
      if (!valid_fips(*f)) {
        throw GraphError("adjacency line " + std::to_string(lineno) + ": malformed FIPS '" + *f +
                         "'");
      }
    }
    if (!cur_name.empty()) result.county_names.emplace(cur_fips, cur_name);
    if (!nb_name.empty()) result.county_names.emplace(nb_fips, nb_name);
    if (state_of(cur_fips) != state || state_of(nb_fips) != state) continue;
    file_counties.insert(cur_fips);
    file_counties.insert(nb_fips);
    pairs.emplace_back(cur_fips, nb_fips);
  }

  CountyGraph& g = result.graph;
  g.kind = GraphKind::Border;
  if (panel_counties.empty()) {
    g.nodes.assign(file_counties.begin(), file_counties.end());
  } else {
    g.nodes = panel_counties;
    const std::set<std::string> keep(panel_counties.begin(), panel_counties.end());
    for (const auto& f : file_counties) {
      if (!keep.contains(f)) result.warnings.push_back("county " + f + " not in panel; dropped");
    }
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i], i);
  for (const auto& [a, b] : pairs) {
    const auto ia = index.find(a);
    const auto ib = index.find(b);
    if (ia == index.end() || ib == index.end()) continue;
    g.edges.push_back({ia->second, ib->second, 1.0});
  }
  normalize_edges(g.edges);
  return result;
}

BorderGraphResult build_border_graph(const std::filesystem::path& path, const std::string& state,
                                     const std::vector<std::string>& panel_counties) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open adjacency file " + path.string());
  return build_border_graph(in, state, panel_counties);
}

const std::array<std::string, kSocioIndexCount>& socio_index_names() {
  static const std::array<std::string, kSocioIndexCount> names = {
      "socioeconomic_status",
      "household_composition_disability",
      "minority_status_language",
      "housing_type_transportation",
      "overall_vulnerability",
      "historic_undervaccination",
      "sociodemographic_barriers",
      "resource_constrained_healthcare",
      "healthcare_accessibility_barriers",
  };
  return names;
}

std::vector<SocioVector> load_socio(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "fips,index_name,value") {
    throw GraphError("socioeconomic CSV must start with header 'fips,index_name,value'");
  }
  const auto& names = socio_index_names();
  std::map<std::string, std::array<std::optional<double>, kSocioIndexCount>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_record(line);
    if (fields.size() != 3) {
      throw GraphError("socio line " + std::to_string(lineno) + ": expected 3 fields");
    }
    const std::string fips(detail::trim(fields[0]));
    const std::string name(detail::trim(fields[1]));
    if (!valid_fips(fips)) {
      throw GraphError("socio line " + std::to_string(lineno) + ": malformed FIPS '" + fips + "'");
    }
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      throw GraphError("socio line " + std::to_string(lineno) + ": unknown index '" + name + "'");
    }
    double value = 0.0;
    try {
      std::size_t used = 0;
      const std::string text(detail::trim(fields[2]));
      value = std::stod(text, &used);
      if (used != text.size() || !std::isfinite(value)) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw GraphError("socio line " + std::to_string(lineno) + ": bad value for (" + fips + ", " +
                       name + ")");
    }
    rows[fips][static_cast<std::size_t>(it - names.begin())] = value;
  }
  std::vector<SocioVector> out;
  for (const auto& [fips, vals] : rows) {
    SocioVector v{fips, {}};
    for (std::size_t i = 0; i < kSocioIndexCount; ++i) {
      if (!vals[i]) throw GraphError("missing socioeconomic index (" + fips + ", " + names[i] + ")");
      v.indices[i] = *vals[i];
    }
    out.push_back(v);
  }
  return out;
}

std::vector<SocioVector> load_socio(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open socioeconomic file " + path.string());
  return load_socio(in);
}

DistanceMatrix socio_distance_matrix(const std::vector<SocioVector>& vectors,
                                     SocioScaling scaling) {
  const std::size_t n = vectors.size();
  std::vector<std::array<double, kSocioIndexCount>> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kSocioIndexCount; ++k) {
      if (!std::isfinite(vectors[i].indices[k])) {
        throw GraphError("missing socioeconomic index (" + vectors[i].fips + ", " +
                         socio_index_names()[k] + ")");
      }
    }
    x[i] = vectors[i].indices;
  }
  if (scaling == SocioScaling::ZScore && n > 0) {
    for (std::size_t k = 0; k < kSocioIndexCount; ++k) {
      double mean = 0.0;
      for (const auto& row : x) mean += row[k];
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (const auto& row : x) ss += (row[k] - mean) * (row[k] - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      if (!(sd > 0.0)) continue;  // constant index: contributes nothing either way
      for (auto& row : x) row[k] = (row[k] - mean) / sd;
    }
  }
  DistanceMatrix m;
  m.distances = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m.nodes.push_back(vectors[i].fips);
    for (std::size_t j = i + 1; j < n; ++j) {
      double ss = 0.0;
      for (std::size_t k = 0; k < kSocioIndexCount; ++k) {
        const double d = x[i][k] - x[j][k];
        ss += d * d;
      }
      m.distances(i, j) = m.distances(j, i) = std::sqrt(ss);
    }
  }
  return m;
}

CountyGraph build_socio_graph(const DistanceMatrix& matrix, const SocioRule& rule) {
  const std::size_t n = matrix.nodes.size();
  CountyGraph g;
  g.kind = GraphKind::Socioeconomic;
  g.nodes = matrix.nodes;
  const Tensor& d = matrix.distances;

  if (const auto* top = std::get_if<TopK>(&rule)) {
    if (top->k < 1 || top->k >= n) {
      throw GraphError("top_k needs 1 <= k < N (k=" + std::to_string(top->k) +
                       ", N=" + std::to_string(n) + ")");
    }
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < n; ++i) {
      others.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) others.push_back(j);
      }
      std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(top->k),
                        others.end(), [&](std::size_t a, std::size_t b) {
                          return d(i, a) < d(i, b) || (d(i, a) == d(i, b) && a < b);
                        });
      for (std::size_t r = 0; r < top->k; ++r) g.edges.push_back({i, others[r], 0.0});
    }
  } else {
    const double limit = std::get<Threshold>(rule).max_distance;
    if (std::isnan(limit) || limit < 0.0) throw GraphError("distance threshold must be >= 0");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (d(i, j) <= limit) g.edges.push_back({i, j, 0.0});
      }
    }
  }
  normalize_edges(g.edges);
  for (Edge& e : g.edges) e.weight = d(e.u, e.v);
  return g;
}

std::vector<Centrality> degree_centrality(const CountyGraph& graph) {
  const std::size_t n = graph.node_count();
  if (n == 0) throw GraphError("degree centrality of an empty graph");
  const auto deg = graph.degrees();
  std::vector<Centrality> out(n);
  std::vector<std::size_t> distinct(deg.begin(), deg.end());
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  for (std::size_t i = 0; i < n; ++i) {
    out[i].fips = graph.nodes[i];
    out[i].degree = deg[i];
    out[i].score = n > 1 ? static_cast<double>(deg[i]) / static_cast<double>(n - 1) : 0.0;
    out[i].rank = static_cast<std::size_t>(
                      std::find(distinct.begin(), distinct.end(), deg[i]) - distinct.begin()) +
                  1;
  }
  return out;
}

std::vector<Centrality> ranked(std::vector<Centrality> entries) {
  std::sort(entries.begin(), entries.end(), [](const Centrality& a, const Centrality& b) {
    return std::tie(a.rank, a.fips) < std::tie(b.rank, b.fips);
  });
  return entries;
}

CountyGraph reorder(const CountyGraph& graph, const std::vector<std::string>& order) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < order.size(); ++i) index.emplace(order[i], i);
  CountyGraph out;
  out.kind = graph.kind;
  out.nodes = order;
  for (const Edge& e : graph.edges) {
    const auto a = index.find(graph.nodes[e.u]);
    const auto b = index.find(graph.nodes[e.v]);
    if (a == index.end() || b == index.end()) continue;
    out.edges.push_back({a->second, b->second, e.weight});
  }
  normalize_edges(out.edges);
  return out;
}

nlohmann::json to_json(const CountyGraph& graph) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : graph.edges) edges.push_back({e.u, e.v, e.weight});
  return {{"nodes", graph.nodes}, {"edges", std::move(edges)}, {"kind", to_string(graph.kind)}};
}

CountyGraph graph_from_json(const nlohmann::json& j) {
  CountyGraph g;
  g.nodes = j.at("nodes").get<std::vector<std::string>>();
  g.kind = parse_graph_kind(j.at("kind").get<std::string>());
  for (const auto& e : j.at("edges")) {
    const auto u = e.at(0).get<std::size_t>();
    const auto v = e.at(1).get<std::size_t>();
    if (u >= g.nodes.size() || v >= g.nodes.size()) throw GraphError("edge index out of range");
    g.edges.push_back({u, v, e.at(2).get<double>()});
  }
  normalize_edges(g.edges);
  return g;
}

nlohmann::json to_json(const DistanceMatrix& matrix) {
  return {{"nodes", matrix.nodes}, {"distances", matrix.distances.data()}};
}

DistanceMatrix distance_matrix_from_json(const nlohmann::json& j) {
  DistanceMatrix m;
  m.nodes = j.at("nodes").get<std::vector<std::string>>();
  const std::size_t n = m.nodes.size();
  m.distances = Tensor(Shape{n, n}, j.at("distances").get<std::vector<double>>());
  return m;
}

nlohmann::json to_json(const std::vector<Centrality>& entries) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : entries) {
    out.push_back({{"fips", c.fips}, {"degree", c.degree}, {"score", c.score}, {"rank", c.rank}});
  }
  return out;
}

}  // namespace geocon
