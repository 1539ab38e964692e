#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dtr/data.hpp"
#include "dtr/regime.hpp"

namespace dtr {

using HistoryFn = std::function<double(const History&)>;
using RegretFn = std::function<double(const History&, int action)>;

/// Normal draw for one covariate given the history so far (earlier
/// covariates of the same stage included), truncated to (lower, upper).
struct CovariateSampler {
  std::string name;
  HistoryFn mean;
  HistoryFn sd;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct DgpStage {
  std::vector<CovariateSampler> covariates;
  HistoryFn propensity;  // P(A_j = 1 | H_j)
  RegretFn regret;       // mu_j(h, a) >= 0, zero at the optimal action
  HistoryFn mean_zero;   // optional term with conditional mean zero
};

/// Data-generating process written through regret functions:
/// Y = mu0 + sum_j phi_j(H_j) - sum_j mu_j(H_j, A_j) + N(0, outcome_sd^2).
struct DgpSpec {
  std::string name;
  std::vector<DgpStage> stages;
  double mu0 = 0.0;
  double outcome_sd = 1.0;
  Regime oracle;

  Schema schema() const;
  int stage_count() const noexcept { return static_cast<int>(stages.size()); }
};

/// Two stages, one covariate each (L1, L2); optimal thresholds 250 and 360.
DgpSpec case1_spec();
/// Three stages with two biomarkers per stage and a baseline W.
DgpSpec case2_spec();
Regime case1_oracle(const Schema& schema);
Regime case2_oracle(const Schema& schema);

/// Direct samplers for the two benchmark designs, written out independently
/// of the generic generator.
Dataset generate_case1(std::size_t n, std::uint64_t seed);
Dataset generate_case2(std::size_t n, std::uint64_t seed);

/// Generic generator. Every row is audited: each regret must be
/// nonnegative for both actions and zero at the oracle action; a violation
/// raises ConfigError.
Dataset generate_from_spec(const DgpSpec& spec, std::size_t n, std::uint64_t seed);

struct McValueReport {
  double value = 0.0;
  long draws = 0;
  double se = 0.0;
  std::string regime_id;
};

/// Mean outcome when actions are forced to follow `regime`.
McValueReport mc_value(const Regime& regime, const DgpSpec& spec, long draws, std::uint64_t seed,
                       int jobs = 1, const std::string& regime_id = "regime");

struct AccuracyReport {
  std::vector<double> stage;
  double overall = 0.0;
  std::size_t test_size = 0;
  /// Filled when reports are aggregated over replications.
  std::vector<double> stage_sd;
  double overall_sd = std::numeric_limits<double>::quiet_NaN();
};

/// Agreement of two regimes at the observed histories of `test`.
AccuracyReport decision_accuracy(const Regime& fitted, const Regime& oracle, const Dataset& test);

using Estimator = std::function<std::vector<double>(const Dataset&)>;

struct BootstrapOptions {
  int jobs = 1;
  /// [begin, end) parameter ranges whose sign is aligned to the point
  /// estimate before computing spreads (unit-norm coefficient vectors).
  std::vector<std::pair<std::size_t, std::size_t>> sign_blocks;
};

struct BootstrapResult {
  std::vector<double> point;
  std::vector<double> se;
  int replicates = 0;
  int failures = 0;
};

/// Nonparametric bootstrap over trajectories. Replicates whose estimator
/// throws are counted; more than 20% failures raises NumericalError.
BootstrapResult bootstrap_se(const Estimator& estimator, const Dataset& data, int replicates,
                             std::uint64_t seed, const BootstrapOptions& options = {});

}  // namespace dtr
