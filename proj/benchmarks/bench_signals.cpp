#include "ssr/acoustic.hpp"
#include "ssr/signals.hpp"

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

void BM_FeaturizeRecording(benchmark::State& state) {
  ssr::signals::EmgRecording rec;
  rec.samples = noise(8, state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(ssr::signals::featurize_recording(rec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FeaturizeRecording)->Arg(1000)->Arg(4000)->Unit(benchmark::kMicrosecond);

void BM_LogMel(benchmark::State& state) {
  const ssr::Matrix audio = noise(1, state.range(0), 2);
  const std::span<const double> samples(audio.data(), static_cast<std::size_t>(audio.size()));
  for (auto _ : state) benchmark::DoNotOptimize(ssr::acoustic::log_mel(samples));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogMel)->Arg(16000)->Arg(64000)->Unit(benchmark::kMicrosecond);

}  // namespace
