// Serial reference vs OpenMP kernels. Run with e.g.
//   OMP_NUM_THREADS=8 ./build/bench/gsmile_bench
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "gsmile/significance.hpp"
#include "gsmile/transport.hpp"

namespace {

gsmile::embed::WeightedPointCloud random_cloud(std::size_t n, std::size_t d, std::uint64_t seed,
                                               double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(shift, 1.0);
  std::vector<double> coords(n * d);
  for (auto& c : coords) c = g(rng);
  return gsmile::embed::WeightedPointCloud::uniform(d, std::move(coords));
}

void BM_BootstrapCloudSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_cloud(n, 16, 1), y = random_cloud(n, 16, 2, 0.3);
  for (auto _ : state)
    benchmark::DoNotOptimize(gsmile::significance::bootstrap_pvalue_serial(x, y, 2048, 7));
}

void BM_BootstrapCloudParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_cloud(n, 16, 1), y = random_cloud(n, 16, 2, 0.3);
  for (auto _ : state)
    benchmark::DoNotOptimize(gsmile::significance::bootstrap_pvalue(x, y, 2048, 7));
}

void BM_BootstrapScalarSerial(benchmark::State& state) {
  std::vector<double> x(64), y(64);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (auto& v : x) v = g(rng);
  for (auto& v : y) v = g(rng) + 0.2;
  for (auto _ : state)
    benchmark::DoNotOptimize(gsmile::significance::bootstrap_pvalue_serial(x, y, 10'000, 7));
}

void BM_BootstrapScalarParallel(benchmark::State& state) {
  std::vector<double> x(64), y(64);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (auto& v : x) v = g(rng);
  for (auto& v : y) v = g(rng) + 0.2;
  for (auto _ : state)
    benchmark::DoNotOptimize(gsmile::significance::bootstrap_pvalue(x, y, 10'000, 7));
}

void BM_PairwiseCostSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_cloud(n, 64, 4), b = random_cloud(n, 64, 5);
  for (auto _ : state) benchmark::DoNotOptimize(gsmile::transport::pairwise_cost_serial(a, b, 1));
}

void BM_PairwiseCostParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_cloud(n, 64, 4), b = random_cloud(n, 64, 5);
  for (auto _ : state) benchmark::DoNotOptimize(gsmile::transport::pairwise_cost(a, b, 1));
}

void BM_Emd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_cloud(n, 8, 6), b = random_cloud(n, 8, 7, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(gsmile::transport::emd(a, b, 1));
}

}  // namespace

BENCHMARK(BM_BootstrapCloudSerial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BootstrapCloudParallel)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BootstrapScalarSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BootstrapScalarParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PairwiseCostSerial)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PairwiseCostParallel)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Emd)->Arg(16)->Arg(64)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
