#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "geocon/consensus.hpp"
#include "geocon/graphs.hpp"
#include "geocon/models.hpp"
#include "geocon/train.hpp"

using namespace geocon;

namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(shape);
  for (double& v : t.values()) v = u(rng);
  return t;
}

struct Fixture {
  ModelSpec spec;
  nd::Adjacency adj;
  std::vector<Tensor> steps;
  Tensor target;
  ParamSet params;

  Fixture(std::size_t nodes, std::size_t batch, std::size_t hidden) {
    spec.name = "rgc";
    spec.hidden_dim = hidden;
    spec.output_nodes = nodes;
    spec.input_features = 2;
    spec.dropout = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t i = 0; i + 1 < nodes; ++i) e.push_back({i, i + 1});
    adj = nd::Adjacency::from_edges(nodes, e);
    std::mt19937_64 rng(1);
    for (std::size_t t = 0; t < spec.lags; ++t) steps.push_back(random_tensor({batch * nodes, 2}, rng));
    target = random_tensor({batch * nodes, spec.horizon}, rng);
    params = init_params(spec, 2);
  }
};

void BM_RgcForward(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)), 16, 8);
  for (auto _ : state) {
    nd::Tape tape;
    BoundParams bp(tape, f.params, false);
    benchmark::DoNotOptimize(forward_batch(tape, f.steps, &f.adj, bp, f.spec).value());
  }
}
BENCHMARK(BM_RgcForward)->Arg(20)->Arg(60)->Arg(251);

void BM_RgcForwardBackward(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)), 16, 8);
  for (auto _ : state) {
    nd::Tape tape;
    BoundParams bp(tape, f.params, true);
    nd::Var loss = nd::mse_loss(forward_batch(tape, f.steps, &f.adj, bp, f.spec), f.target);
    tape.backward(loss);
    benchmark::DoNotOptimize(bp.vars().front().second.grad());
  }
}
BENCHMARK(BM_RgcForwardBackward)->Arg(20)->Arg(60)->Arg(251);

void BM_OneTailedTest(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> b(static_cast<std::size_t>(state.range(0))), f(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    f[i] = z(rng);
    b[i] = f[i] + 0.3 + z(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(one_tailed_test(b, f, 0.1));
}
BENCHMARK(BM_OneTailedTest)->Arg(10)->Arg(100);

void BM_SocioKnnGraph(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<SocioVector> v(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i].fips = std::to_string(10000 + i);
    for (double& x : v[i].indices) x = z(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_socio_graph(socio_distance_matrix(v), TopK{4}));
  }
}
BENCHMARK(BM_SocioKnnGraph)->Arg(60)->Arg(254);

}  // namespace

BENCHMARK_MAIN();
