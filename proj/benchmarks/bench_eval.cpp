#include "ssr/eval.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <string>

namespace {

std::string sentence(std::size_t words, unsigned seed) {
  static const char* const kWords[] = {"the", "cat", "sat", "on", "a", "mat", "and", "dog", "ran"};
  std::mt19937_64 rng(seed);
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += kWords[rng() % std::size(kWords)];
  }
  return out;
}

void BM_Wer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::string ref = sentence(n, 1), hyp = sentence(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ssr::eval::wer(ref, hyp));
}
BENCHMARK(BM_Wer)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

}  // namespace
