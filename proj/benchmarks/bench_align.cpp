#include "ssr/align.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

ssr::Matrix noise(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ssr::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_DtwAlign(benchmark::State& state) {
  const ssr::Matrix a = noise(state.range(0), 112, 1), b = noise(state.range(0), 112, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ssr::align::dtw_align(a, b));
}
BENCHMARK(BM_DtwAlign)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_CcaFit(benchmark::State& state) {
  const ssr::Matrix a = noise(state.range(0), 112, 3), b = noise(state.range(0), 80, 4);
  for (auto _ : state) benchmark::DoNotOptimize(ssr::align::cca_fit(a, b, 24));
}
BENCHMARK(BM_CcaFit)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
