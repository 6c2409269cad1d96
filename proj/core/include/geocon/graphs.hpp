#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "geocon/ops.hpp"
#include "geocon/tensor.hpp"

namespace geocon {

class GraphError : public Error {
 public:
  using Error::Error;
};

enum class GraphKind { Border, Socioeconomic };

std::string to_string(GraphKind kind);
/// Accepts "border", "socio" and "socioeconomic".
GraphKind parse_graph_kind(const std::string& text);

struct Edge {
  std::size_t u = 0;  // u < v
  std::size_t v = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected weighted graph over counties. Edges are unordered pairs stored
/// with u < v, sorted; there are no self-loops.
struct CountyGraph {
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
  GraphKind kind = GraphKind::Border;

  std::size_t node_count() const { return nodes.size(); }
  std::vector<std::size_t> degrees() const;
  nd::Adjacency adjacency() const;
};

/// Sorts and de-duplicates edges, dropping self-loops.
void normalize_edges(std::vector<Edge>& edges);

struct BorderGraphResult {
  CountyGraph graph;
  std::map<std::string, std::string> county_names;  // fips -> name
  std::vector<std::string> warnings;
};

/// Reads `county_name|fips|neighbor_name|neighbor_fips` records and keeps
/// only in-state pairs. Empty leading fields repeat the previous record's
/// county (census continuation lines). When `panel_counties` is non-empty it
/// fixes the node order; file counties absent from it are dropped with a
/// warning. A FIPS field that is not 5 digits throws GraphError.
BorderGraphResult build_border_graph(std::istream& in, const std::string& state,
                                     const std::vector<std::string>& panel_counties = {});
BorderGraphResult build_border_graph(const std::filesystem::path& path, const std::string& state,
                                     const std::vector<std::string>& panel_counties = {});

inline constexpr std::size_t kSocioIndexCount = 9;
/// Canonical ids of the nine socioeconomic indices, in vector order.
const std::array<std::string, kSocioIndexCount>& socio_index_names();

struct SocioVector {
  std::string fips;
  std::array<double, kSocioIndexCount> indices{};
};

/// Reads the `fips,index_name,value` CSV. Throws GraphError naming
/// (fips, index_name) when any county lacks an index.
std::vector<SocioVector> load_socio(std::istream& in);
std::vector<SocioVector> load_socio(const std::filesystem::path& path);

enum class SocioScaling { None, ZScore };

struct DistanceMatrix {
  std::vector<std::string> nodes;
  Tensor distances;  // N x N, symmetric, zero diagonal
};

DistanceMatrix socio_distance_matrix(const std::vector<SocioVector>& vectors,
                                     SocioScaling scaling = SocioScaling::ZScore);

struct TopK {
  std::size_t k = 4;
};
struct Threshold {
  double max_distance = std::numeric_limits<double>::infinity();
};
using SocioRule = std::variant<TopK, Threshold>;

/// top_k: union of each node's k nearest neighbours (ties to the lower
/// index); threshold: every pair with distance <= d. Weight = distance.
CountyGraph build_socio_graph(const DistanceMatrix& matrix, const SocioRule& rule);

struct Centrality {
  std::string fips;
  std::size_t degree = 0;
  double score = 0.0;  // degree / (N - 1)
  std::size_t rank = 1;  // dense, 1 = highest degree
};

/// One entry per node, in node order.
std::vector<Centrality> degree_centrality(const CountyGraph& graph);
/// Presentation order: rank ascending, FIPS ascending within a rank.
std::vector<Centrality> ranked(std::vector<Centrality> entries);

/// Re-indexes `graph` onto `order`; nodes outside `order` are dropped along
/// with their edges, and counties missing from the graph become isolated.
CountyGraph reorder(const CountyGraph& graph, const std::vector<std::string>& order);

nlohmann::json to_json(const CountyGraph& graph);
CountyGraph graph_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DistanceMatrix& matrix);
DistanceMatrix distance_matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<Centrality>& entries);

}  // namespace geocon
