// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to the
// core count to see the speedup; results are identical by construction.
#include <benchmark/benchmark.h>

#include "knowrl/common.hpp"
#include "knowrl/embedding.hpp"
#include "knowrl/kernels.hpp"
#include "knowrl/objective.hpp"

namespace {

using namespace knowrl;

EmbeddingMatrix random_unit_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingMatrix m;
  m.dim = dim;
  std::vector<double> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (auto& x : row) {
      x = rng.uniform() - 0.5;
      norm += x * x;
    }
    for (auto& x : row) x /= std::sqrt(norm);
    m.append(row);
  }
  return m;
}

template <auto Fn>
void BM_SimilarPairs(benchmark::State& state) {
  const auto m = random_unit_rows(static_cast<std::size_t>(state.range(0)), 256, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(m, 0.3));
  state.SetComplexityN(state.range(0));
}

template <auto Fn>
void BM_DotScores(benchmark::State& state) {
  const auto m = random_unit_rows(static_cast<std::size_t>(state.range(0)), 256, 2);
  const auto q = random_unit_rows(1, 256, 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(m, q.row(0)));
}

template <auto Fn>
void BM_SurrogateSamples(benchmark::State& state) {
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.25, 0.15};
  const std::vector<double> ratios{0.9, 1.1, 1.3, 0.7, 1.0};
  const std::vector<double> rewards{4, 2, 0, 0, -2};
  kernels::SurrogateProblem p{probs, ratios, rewards, 3};
  for (auto _ : state) benchmark::DoNotOptimize(Fn(p, static_cast<std::size_t>(state.range(0)), 11));
}

BENCHMARK(BM_SimilarPairs<kernels::serial::similar_pairs>)->Name("similar_pairs/serial")->Arg(200)->Arg(1000);
BENCHMARK(BM_SimilarPairs<kernels::parallel::similar_pairs>)->Name("similar_pairs/omp")->Arg(200)->Arg(1000);
BENCHMARK(BM_DotScores<kernels::serial::dot_scores>)->Name("dot_scores/serial")->Arg(10000)->Arg(100000);
BENCHMARK(BM_DotScores<kernels::parallel::dot_scores>)->Name("dot_scores/omp")->Arg(10000)->Arg(100000);
BENCHMARK(BM_SurrogateSamples<kernels::serial::surrogate_samples>)->Name("surrogate_mc/serial")->Arg(100000);
BENCHMARK(BM_SurrogateSamples<kernels::parallel::surrogate_samples>)->Name("surrogate_mc/omp")->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
