#include <benchmark/benchmark.h>

#include "aipoll/prompt.hpp"

using namespace aipoll;

namespace {

void BM_RenderAllVariants(benchmark::State& state) {
  const Question q("q", "Increase spending on public schools", 5, "Strongly disagree", "Strongly agree");
  for (auto _ : state) {
    for (const auto& cell : all_cells()) {
      benchmark::DoNotOptimize(render(q, cell, PromptVariant::single_individual()));
      for (const auto& v : all_dd_variants()) benchmark::DoNotOptimize(render(q, cell, v));
    }
  }
}
BENCHMARK(BM_RenderAllVariants);

}  // namespace
