#include <benchmark/benchmark.h>

#include <random>

#include "aipoll/metrics.hpp"

using namespace aipoll;

namespace {

OpinionDistribution random_distribution(std::mt19937_64& gen, int c) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> raw(static_cast<std::size_t>(c));
  for (auto& x : raw) x = u(gen);
  return make_distribution(raw, c);
}

void BM_Nemd(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  std::mt19937_64 gen(1);
  const auto a = random_distribution(gen, c);
  const auto b = random_distribution(gen, c);
  for (auto _ : state) benchmark::DoNotOptimize(nemd(a, b));
}
BENCHMARK(BM_Nemd)->Arg(2)->Arg(4)->Arg(5);

void BM_CompareRow(benchmark::State& state) {
  std::mt19937_64 gen(2);
  const auto a = random_distribution(gen, 5);
  const auto b = random_distribution(gen, 5);
  const auto key = PermutationKey::parse("q|Moderate|Man|White|DD|cot=1|dist=0");
  for (auto _ : state) benchmark::DoNotOptimize(compare(key, 30, a, b));
}
BENCHMARK(BM_CompareRow);

void BM_MovingAverageBand(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = u(gen), y[i] = u(gen);
  for (auto _ : state) benchmark::DoNotOptimize(moving_average_band(x, y, 0.1));
}
BENCHMARK(BM_MovingAverageBand)->Arg(400)->Arg(4000);

}  // namespace
