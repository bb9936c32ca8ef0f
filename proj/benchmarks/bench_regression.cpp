#include <benchmark/benchmark.h>

#include "fixtures.hpp"

using namespace hbma;

static void BM_FitFromScratch(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const RegressionProblem p = bench::problem(k, 200);
  std::vector<std::size_t> ids(k);
  for (std::size_t j = 0; j < k; ++j) ids[j] = j;
  for (auto _ : state) benchmark::DoNotOptimize(p.fit_subset(ids).rss());
}
BENCHMARK(BM_FitFromScratch)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

// Cost of one column added to an existing factorization.
static void BM_RefitExtend(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const RegressionProblem p = bench::problem(k + 1, 200);
  std::vector<std::size_t> ids(k);
  for (std::size_t j = 0; j < k; ++j) ids[j] = j;
  const LeastSquaresFit parent = p.fit_subset(ids);
  for (auto _ : state) benchmark::DoNotOptimize(refit_extend(parent, p.candidates.col(static_cast<Eigen::Index>(k)), k).rss());
}
BENCHMARK(BM_RefitExtend)->Arg(1)->Arg(3)->Arg(7);
