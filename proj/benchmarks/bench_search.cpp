#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "hbma/aggregate.hpp"
#include "hbma/search.hpp"

using namespace hbma;

static void BM_OccamSearch(benchmark::State& state) {
  const RegressionProblem p = bench::problem(static_cast<std::size_t>(state.range(0)), 200);
  SearchConfig c;
  c.max_size = 4;
  for (auto _ : state) benchmark::DoNotOptimize(occam_search(p, c).size());
}
BENCHMARK(BM_OccamSearch)->Arg(10)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_ExhaustiveSearch(benchmark::State& state) {
  const RegressionProblem p = bench::problem(static_cast<std::size_t>(state.range(0)), 200);
  SearchConfig c;
  c.max_size = 3;
  c.strategy = SearchStrategy::exhaustive;
  c.threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(exhaustive_search(p, c).size());
}
BENCHMARK(BM_ExhaustiveSearch)->Args({20, 1})->Args({20, 4})->Unit(benchmark::kMillisecond);

static void BM_Mc3Search(benchmark::State& state) {
  const RegressionProblem p = bench::problem(40, 200);
  SearchConfig c;
  c.strategy = SearchStrategy::mc3;
  c.mc3_iterations = static_cast<std::size_t>(state.range(0));
  c.seed = 7;
  for (auto _ : state) benchmark::DoNotOptimize(mc3_search(p, c).size());
}
BENCHMARK(BM_Mc3Search)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);

static void BM_NormalizeAndAggregate(benchmark::State& state) {
  const RegressionProblem p = bench::problem(20, 200);
  SearchConfig c;
  c.max_size = 3;
  c.strategy = SearchStrategy::exhaustive;
  const ModelSet set = exhaustive_search(p, c);
  for (auto _ : state) {
    const ModelPosterior post = normalize(set);
    benchmark::DoNotOptimize(averaged_coefficients(post).inclusion.data());
  }
}
BENCHMARK(BM_NormalizeAndAggregate)->Unit(benchmark::kMicrosecond);
