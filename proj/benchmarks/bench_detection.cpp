#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "hbma/detection.hpp"

using namespace hbma;

static void BM_BackgroundStats(benchmark::State& state) {
  const ImageCube c = bench::cube(128, 128, 100);
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(background_stats(c, kDefaultShrinkage, {}, threads).mean.data());
}
BENCHMARK(BM_BackgroundStats)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_AceMap(benchmark::State& state) {
  const ImageCube c = bench::cube(128, 128, 100);
  const BackgroundStats s = background_stats(c);
  const Spectrum target("t", c.grid(), Eigen::VectorXd::LinSpaced(100, 0.2, 0.6));
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ace_map(c, target, s, threads).scores.data());
}
BENCHMARK(BM_AceMap)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
