#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "geocon/graphs.hpp"
#include "helpers.hpp"

using namespace geocon;

namespace {

using EdgeSet = std::set<std::pair<std::size_t, std::size_t>>;

EdgeSet edge_set(const CountyGraph& g) {
  EdgeSet s;
  for (const Edge& e : g.edges) s.insert({e.u, e.v});
  return s;
}

DistanceMatrix random_matrix(std::size_t n, std::mt19937_64& rng) {
  std::vector<SocioVector> v(n);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    v[i].fips = "99" + std::to_string(100 + i);
    for (double& x : v[i].indices) x = g(rng);
  }
  return socio_distance_matrix(v, SocioScaling::None);
}

DistanceMatrix line_matrix(const std::vector<double>& xs) {
  DistanceMatrix m;
  m.distances = Tensor::matrix(xs.size(), xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    m.nodes.push_back("9900" + std::to_string(i + 1));
    for (std::size_t j = 0; j < xs.size(); ++j) m.distances(i, j) = std::abs(xs[i] - xs[j]);
  }
  return m;
}

// Independent k-NN union: full sort of every row.
EdgeSet brute_knn(const DistanceMatrix& m, std::size_t k) {
  const std::size_t n = m.nodes.size();
  EdgeSet s;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> row;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back({m.distances(i, j), j});
    }
    std::sort(row.begin(), row.end());
    for (std::size_t r = 0; r < k; ++r) s.insert(std::minmax(i, row[r].second));
  }
  return s;
}

}  // namespace

TEST(BorderGraph, PathFixtureAndSelfLoops) {
  std::istringstream in(
      "\"A County, ZZ\"|99001|\"A County, ZZ\"|99001\n"
      "||\"B County, ZZ\"|99003\n"
      "\"B County, ZZ\"|99003|\"A County, ZZ\"|99001\n"
      "||\"C County, ZZ\"|99005\n"
      "||\"Other County, YY\"|98001\n"
      "\"C County, ZZ\"|99005|\"B County, ZZ\"|99003\n");
  const auto r = build_border_graph(in, "99");
  EXPECT_EQ(r.graph.nodes, (std::vector<std::string>{"99001", "99003", "99005"}));
  EXPECT_EQ(edge_set(r.graph), (EdgeSet{{0, 1}, {1, 2}}));
  for (const Edge& e : r.graph.edges) EXPECT_EQ(e.weight, 1.0);
  EXPECT_EQ(r.county_names.at("99001"), "A County, ZZ");
}

TEST(BorderGraph, PanelFixesNodesAndWarnsOnExtras) {
  std::istringstream in("A|99001|B|99003\n||C|99005\n");
  const auto r = build_border_graph(in, "99", {"99001", "99003"});
  EXPECT_EQ(r.graph.nodes, (std::vector<std::string>{"99001", "99003"}));
  EXPECT_EQ(edge_set(r.graph), (EdgeSet{{0, 1}}));
  EXPECT_FALSE(r.warnings.empty());
}

TEST(BorderGraph, MalformedFipsIsHardError) {
  std::istringstream in("A|9901|B|99003\n");
  EXPECT_THROW(build_border_graph(in, "99"), GraphError);
}

TEST(Socio, LoadReportsMissingIndex) {
  std::ostringstream csv;
  csv << "fips,index_name,value\n";
  for (const auto& name : socio_index_names()) csv << "99001," << name << ",1.0\n";
  for (std::size_t i = 0; i + 1 < kSocioIndexCount; ++i) {
    csv << "99003," << socio_index_names()[i] << ",2.0\n";
  }
  std::istringstream in(csv.str());
  try {
    load_socio(in);
    FAIL();
  } catch (const GraphError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("99003"), std::string::npos);
    EXPECT_NE(msg.find(socio_index_names().back()), std::string::npos);
  }
}

TEST(Socio, DistanceClosedForms) {
  std::vector<SocioVector> v(3);
  v[0].fips = "99001";
  v[1].fips = "99003";
  v[2].fips = "99005";
  v[0].indices[0] = 1.0;
  v[1].indices[1] = 1.0;
  v[2].indices[0] = 1.0;
  const DistanceMatrix m = socio_distance_matrix(v, SocioScaling::None);
  EXPECT_DOUBLE_EQ(m.distances(0, 1), std::sqrt(2.0));
  EXPECT_EQ(m.distances(0, 2), 0.0);
  EXPECT_EQ(m.distances(1, 1), 0.0);
}

TEST(Socio, DistanceMatchesScalarOracle) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(5.0, 3.0);
  std::vector<SocioVector> v(10);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i].fips = "99" + std::to_string(100 + i);
    for (double& x : v[i].indices) x = g(rng);
  }
  // z-score each index independently (population sd), then Euclidean
  std::vector<std::array<double, kSocioIndexCount>> z(v.size());
  for (std::size_t k = 0; k < kSocioIndexCount; ++k) {
    double mean = 0.0, var = 0.0;
    for (const auto& s : v) mean += s.indices[k];
    mean /= static_cast<double>(v.size());
    for (const auto& s : v) var += (s.indices[k] - mean) * (s.indices[k] - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) z[i][k] = (v[i].indices[k] - mean) / sd;
  }
  const DistanceMatrix m = socio_distance_matrix(v, SocioScaling::ZScore);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kSocioIndexCount; ++k) acc += (z[i][k] - z[j][k]) * (z[i][k] - z[j][k]);
      EXPECT_NEAR(m.distances(i, j), std::sqrt(acc), 1e-12);
      EXPECT_EQ(m.distances(i, j), m.distances(j, i));
    }
  }
}

TEST(SocioGraph, NearestNeighbourByHand) {
  const CountyGraph g = build_socio_graph(line_matrix({0.0, 1.0, 3.0}), TopK{1});
  EXPECT_EQ(edge_set(g), (EdgeSet{{0, 1}, {1, 2}}));
  EXPECT_EQ(g.edges[1].weight, 2.0);
}

TEST(SocioGraph, InfiniteThresholdIsComplete) {
  std::mt19937_64 rng(32);
  const auto m = random_matrix(12, rng);
  EXPECT_EQ(build_socio_graph(m, Threshold{}).edges.size(), 12u * 11u / 2u);
}

TEST(SocioGraph, RuleErrors) {
  std::mt19937_64 rng(33);
  const auto m = random_matrix(5, rng);
  EXPECT_THROW(build_socio_graph(m, TopK{0}), GraphError);
  EXPECT_THROW(build_socio_graph(m, TopK{5}), GraphError);
  EXPECT_THROW(build_socio_graph(m, Threshold{-1.0}), GraphError);
}

TEST(SocioGraph, KnnMatchesBruteForce) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_matrix(20, rng);
    const CountyGraph g = build_socio_graph(m, TopK{3});
    EXPECT_EQ(edge_set(g), brute_knn(m, 3));
    for (const Edge& e : g.edges) EXPECT_EQ(e.weight, m.distances(e.u, e.v));
  }
}

TEST(SocioGraph, ThresholdMonotone) {
  std::mt19937_64 rng(35);
  const auto m = random_matrix(15, rng);
  std::uniform_real_distribution<double> d(0.0, 6.0);
  for (int trial = 0; trial < 30; ++trial) {
    double a = d(rng), b = d(rng);
    if (a > b) std::swap(a, b);
    const EdgeSet lo = edge_set(build_socio_graph(m, Threshold{a}));
    const EdgeSet hi = edge_set(build_socio_graph(m, Threshold{b}));
    EXPECT_TRUE(std::includes(hi.begin(), hi.end(), lo.begin(), lo.end()));
  }
}

TEST(SocioGraph, PermutationEquivariant) {
  std::mt19937_64 rng(36);
  const auto m = random_matrix(12, rng);
  std::vector<std::size_t> perm(12);
  for (std::size_t i = 0; i < 12; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  DistanceMatrix p;
  p.distances = Tensor::matrix(12, 12);
  for (std::size_t i = 0; i < 12; ++i) {
    p.nodes.push_back(m.nodes[perm[i]]);
    for (std::size_t j = 0; j < 12; ++j) p.distances(i, j) = m.distances(perm[i], perm[j]);
  }
  for (const SocioRule& rule : {SocioRule{TopK{2}}, SocioRule{Threshold{3.0}}}) {
    const CountyGraph a = build_socio_graph(m, rule);
    const CountyGraph b = build_socio_graph(p, rule);
    std::set<std::pair<std::string, std::string>> ea, eb;
    for (const Edge& e : a.edges) ea.insert(std::minmax(a.nodes[e.u], a.nodes[e.v]));
    for (const Edge& e : b.edges) eb.insert(std::minmax(b.nodes[e.u], b.nodes[e.v]));
    EXPECT_EQ(ea, eb);
  }
}

TEST(Centrality, PathAndComplete) {
  CountyGraph path{{"99001", "99003", "99005"}, {{0, 1, 1.0}, {1, 2, 1.0}}, GraphKind::Border};
  const auto c = degree_centrality(path);
  EXPECT_EQ(c[1].rank, 1u);
  EXPECT_DOUBLE_EQ(c[1].score, 1.0);
  EXPECT_EQ(c[0].rank, 2u);
  EXPECT_EQ(c[2].rank, 2u);
  EXPECT_DOUBLE_EQ(c[0].score, 0.5);
  const auto order = ranked(c);
  EXPECT_EQ(order[0].fips, "99003");
  EXPECT_EQ(order[1].fips, "99001");

  std::mt19937_64 rng(37);
  const CountyGraph complete = build_socio_graph(random_matrix(6, rng), Threshold{});
  for (const auto& e : degree_centrality(complete)) {
    EXPECT_DOUBLE_EQ(e.score, 1.0);
    EXPECT_EQ(e.rank, 1u);
  }
  CountyGraph single{{"99001"}, {}, GraphKind::Border};
  EXPECT_EQ(degree_centrality(single)[0].score, 0.0);
}

TEST(Centrality, MatchesAdjacencyScan) {
  std::mt19937_64 rng(38);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 15;
    CountyGraph g;
    for (std::size_t i = 0; i < n; ++i) g.nodes.push_back("99" + std::to_string(100 + i));
    std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (coin(rng)) {
          g.edges.push_back({i, j, 1.0});
          adj[i][j] = adj[j][i] = 1;
        }
    const auto c = degree_centrality(g);
    for (std::size_t i = 0; i < n; ++i) {
      int deg = 0;
      for (std::size_t j = 0; j < n; ++j) deg += adj[i][j];
      // dense rank: 1 + number of distinct degrees strictly greater
      std::set<int> greater;
      for (std::size_t j = 0; j < n; ++j) {
        int dj = 0;
        for (std::size_t k = 0; k < n; ++k) dj += adj[j][k];
        if (dj > deg) greater.insert(dj);
      }
      EXPECT_EQ(c[i].degree, static_cast<std::size_t>(deg));
      EXPECT_EQ(c[i].rank, greater.size() + 1);
      EXPECT_DOUBLE_EQ(c[i].score, deg / 14.0);
      EXPECT_GE(c[i].score, 0.0);
      EXPECT_LE(c[i].score, 1.0);
    }
  }
}

TEST(GraphJson, RoundTrip) {
  std::mt19937_64 rng(39);
  const auto m = random_matrix(8, rng);
  const CountyGraph g = build_socio_graph(m, TopK{2});
  const CountyGraph back = graph_from_json(to_json(g));
  EXPECT_EQ(back.nodes, g.nodes);
  EXPECT_EQ(edge_set(back), edge_set(g));
  EXPECT_EQ(back.kind, GraphKind::Socioeconomic);
  const DistanceMatrix mb = distance_matrix_from_json(to_json(m));
  EXPECT_EQ(mb.distances, m.distances);
}
