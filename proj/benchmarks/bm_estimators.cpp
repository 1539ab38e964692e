#include <benchmark/benchmark.h>

#include "dtr/ctree.hpp"
#include "dtr/direct.hpp"
#include "dtr/indirect.hpp"
#include "dtr/simlab.hpp"

namespace {

void BM_QLearning(benchmark::State& state) {
  auto d = dtr::generate_case1(static_cast<std::size_t>(state.range(0)), 1);
  auto specs = dtr::case1_specs(d.schema());
  for (auto _ : state) benchmark::DoNotOptimize(dtr::q_learning_fit(d, specs).mean_values);
}
BENCHMARK(BM_QLearning)->Arg(1000)->Arg(10000);

void BM_ALearning(benchmark::State& state) {
  auto d = dtr::generate_case1(1000, 2);
  auto specs = dtr::case1_specs(d.schema());
  const auto m = static_cast<dtr::Method>(state.range(0));
  state.SetLabel(dtr::to_string(m));
  for (auto _ : state) benchmark::DoNotOptimize(dtr::a_learning_fit(d, specs, m).mean_values);
}
BENCHMARK(BM_ALearning)
    ->Arg(static_cast<int>(dtr::Method::a1))
    ->Arg(static_cast<int>(dtr::Method::a3))
    ->Arg(static_cast<int>(dtr::Method::a4))
    ->Arg(static_cast<int>(dtr::Method::dwols));

void BM_CausalTree(benchmark::State& state) {
  auto d = dtr::generate_case2(static_cast<std::size_t>(state.range(0)), 3);
  const auto& s = d.schema();
  std::vector<dtr::CtreeStageSpec> specs;
  const char* props[] = {"1,W", "1,L21,L22", "1,L31"};
  for (int j = 1; j <= 3; ++j) {
    dtr::CtreeStageSpec c;
    c.features = dtr::default_tree_features(s, j);
    c.propensity = dtr::FeatureMap::parse(props[j - 1], s, j);
    specs.push_back(c);
  }
  for (auto _ : state) benchmark::DoNotOptimize(dtr::causal_tree_fit(d, specs).mean_values);
}
BENCHMARK(BM_CausalTree)->Arg(1000)->Arg(4000);

void BM_IpweEvaluation(benchmark::State& state) {
  auto d = dtr::generate_case1(static_cast<std::size_t>(state.range(0)), 4);
  const auto& s = d.schema();
  auto props = dtr::fit_propensities(
      d, {dtr::FeatureMap::parse("1,L1", s, 1), dtr::FeatureMap::parse("1,L2", s, 2)});
  dtr::PolicyEvaluator ev(d, props);
  auto cls = dtr::threshold_class(s, {"L1", "L2"}, {dtr::Direction::below, dtr::Direction::below});
  double c = 200;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ev.ipwe(cls.make({c, 360})).value);
    c = c < 300 ? c + 1 : 200;
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IpweEvaluation)->Arg(1000)->Arg(10000);

void BM_ThresholdSearch(benchmark::State& state) {
  auto d = dtr::generate_case1(1000, 5);
  const auto& s = d.schema();
  auto props = dtr::fit_propensities(
      d, {dtr::FeatureMap::parse("1,L1", s, 1), dtr::FeatureMap::parse("1,L2", s, 2)});
  auto q = dtr::q_learning_fit(d, dtr::case1_specs(s));
  dtr::PolicyEvaluator ev(d, props, &q);
  auto cls = dtr::threshold_class(s, {"L1", "L2"}, {dtr::Direction::below, dtr::Direction::below});
  for (auto _ : state)
    benchmark::DoNotOptimize(
        dtr::search_optimal_regime(ev, cls, dtr::ValueEstimator::aipwe).value.value);
}
BENCHMARK(BM_ThresholdSearch)->Unit(benchmark::kMillisecond);

void BM_Bowl(benchmark::State& state) {
  auto d = dtr::generate_case2(1000, 6);
  const auto& s = d.schema();
  auto props = dtr::fit_propensities(d, {dtr::FeatureMap::parse("1,W", s, 1),
                                         dtr::FeatureMap::parse("1,L21,L22", s, 2),
                                         dtr::FeatureMap::parse("1,L31", s, 3)});
  dtr::OwlSpec spec;
  spec.features = {dtr::FeatureMap::parse("L11,L12", s, 1, false),
                   dtr::FeatureMap::parse("L21,L22", s, 2, false),
                   dtr::FeatureMap::parse("L31,L32", s, 3, false)};
  for (auto _ : state) benchmark::DoNotOptimize(dtr::bowl_fit(d, spec, props).stages);
}
BENCHMARK(BM_Bowl)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
