#include <benchmark/benchmark.h>

#include "transduct/affinity.hpp"
#include "transduct/pseudo_label.hpp"
#include "transduct/solver.hpp"
#include "transduct/synthetic.hpp"

namespace {

using namespace transduct;

SyntheticInstance instance(std::size_t n, std::size_t k, std::size_t d) {
  SyntheticSpec spec;
  spec.n = n;
  spec.k = k;
  spec.d = d;
  spec.seed = 1;
  return generate_mixture(spec);
}

void BM_KnnAffinity(benchmark::State& state) {
  const auto inst = instance(static_cast<std::size_t>(state.range(0)), 10, 128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_affinity(inst.images, AffinityMode::kKnn, 3));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KnnAffinity)->RangeMultiplier(2)->Range(512, 4096)->Unit(benchmark::kMillisecond)->Complexity();

void BM_DenseAffinity(benchmark::State& state) {
  const auto inst = instance(static_cast<std::size_t>(state.range(0)), 10, 128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_affinity(inst.images, AffinityMode::kDenseClamped));
  }
}
BENCHMARK(BM_DenseAffinity)->RangeMultiplier(2)->Range(512, 2048)->Unit(benchmark::kMillisecond);

void BM_ZStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto inst = instance(n, 30, 128);
  const SimplexMatrix y = compute_pseudo_labels(inst.images, inst.texts, Temperature());
  const AffinityGraph w = build_affinity(inst.images, AffinityMode::kKnn, 3);
  const Matrix log_p = log_likelihood(inst.images, init_gmm(inst.images, y));
  for (auto _ : state) {
    benchmark::DoNotOptimize(z_step(y, log_p, w, y));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ZStep)->RangeMultiplier(4)->Range(1024, 16384)->Unit(benchmark::kMicrosecond);

void BM_Solve(benchmark::State& state) {
  const auto inst = instance(static_cast<std::size_t>(state.range(0)), 5, 64);
  const SolverConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(inst.images, inst.texts, cfg));
  }
}
BENCHMARK(BM_Solve)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
