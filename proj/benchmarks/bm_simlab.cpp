#include <benchmark/benchmark.h>

#include "dtr/simlab.hpp"

namespace {

void BM_GenerateCase1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(dtr::generate_case1(n, seed++).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateCase1)->Arg(1000)->Arg(100000);

void BM_GenerateCase2(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(dtr::generate_case2(n, seed++).size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateCase2)->Arg(1000)->Arg(100000);

void BM_GenerateFromSpec(benchmark::State& state) {
  auto spec = dtr::case2_spec();
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(dtr::generate_from_spec(spec, 1000, seed++).size());
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_GenerateFromSpec);

void BM_McValue(benchmark::State& state) {
  auto spec = dtr::case1_spec();
  for (auto _ : state) benchmark::DoNotOptimize(dtr::mc_value(spec.oracle, spec, 10000, 7).value);
}
BENCHMARK(BM_McValue)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
