#include <benchmark/benchmark.h>

#include <cmath>

#include "dtr/rng.hpp"
#include "dtr/stats.hpp"
#include "dtr/svm.hpp"

namespace {

dtr::DesignMatrix random_design(int n, int p, std::uint64_t seed) {
  dtr::Rng rng(seed);
  dtr::DesignMatrix X{Eigen::MatrixXd(n, p), {}};
  for (int k = 0; k < p; ++k) X.labels.push_back("x" + std::to_string(k));
  for (int i = 0; i < n; ++i) {
    X.values(i, 0) = 1.0;
    for (int k = 1; k < p; ++k) X.values(i, k) = rng.normal();
  }
  return X;
}

void BM_Ols(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto X = random_design(n, 6, 1);
  dtr::Rng rng(2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = X.values.row(i).sum() + rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(dtr::ols_fit(X, y).coef);
  state.SetComplexityN(n);
}
BENCHMARK(BM_Ols)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_Logistic(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto X = random_design(n, 4, 3);
  dtr::Rng rng(4);
  std::vector<int> a(n);
  for (int i = 0; i < n; ++i) a[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-0.5 * X.values.row(i).sum())));
  for (auto _ : state) benchmark::DoNotOptimize(dtr::logistic_fit(X, a).coef);
  state.SetComplexityN(n);
}
BENCHMARK(BM_Logistic)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_JointEe(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto R = random_design(n, 2, 5), D = random_design(n, 5, 6);
  dtr::Rng rng(7);
  std::vector<int> a(n);
  Eigen::VectorXd pi(n), v(n);
  for (int i = 0; i < n; ++i) {
    pi[i] = 0.2 + 0.6 * rng.uniform();
    a[i] = rng.bernoulli(pi[i]);
    v[i] = rng.normal(0, 10);
  }
  for (auto _ : state) benchmark::DoNotOptimize(dtr::solve_joint_linear_ee(R, a, D, pi, v).psi);
}
BENCHMARK(BM_JointEe)->Arg(1000)->Arg(10000);

void BM_WeightedSvm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  dtr::Rng rng(8);
  Eigen::MatrixXd X(n, 2);
  std::vector<int> y(n);
  Eigen::VectorXd box(n);
  for (int i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.5) ? 1 : -1;
    X(i, 0) = rng.normal(0.5 * y[i], 1);
    X(i, 1) = rng.normal(-0.5 * y[i], 1);
    box[i] = rng.uniform();
  }
  const auto rbf = state.range(1) != 0;
  const Eigen::MatrixXd K = dtr::kernel_matrix(rbf ? dtr::Kernel::rbf : dtr::Kernel::linear, 0.5, X, X);
  for (auto _ : state) benchmark::DoNotOptimize(dtr::solve_weighted_svm(K, y, box).alpha);
}
BENCHMARK(BM_WeightedSvm)->ArgsProduct({{250, 1000}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
