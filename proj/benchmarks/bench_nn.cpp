#include "ssr/nn/tape.hpp"

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

void BM_Attention(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const ssr::Matrix q = noise(n, 64, 1), k = noise(n, 64, 2), v = noise(n, 64, 3);
  const ssr::nn::Mask mask = ssr::nn::causal_mask(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssr::nn::scaled_dot_product_attention(q, k, v, nullptr, &mask));
  }
}
BENCHMARK(BM_Attention)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace
