#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dtr/data.hpp"
#include "dtr/fit.hpp"
#include "dtr/propensity.hpp"
#include "dtr/regime.hpp"
#include "dtr/stats.hpp"
#include "dtr/svm.hpp"

namespace dtr {

enum class ValueEstimator { ipwe, aipwe };

std::string to_string(ValueEstimator e);

struct ValueEstimate {
  double value = 0.0;
  ValueEstimator estimator = ValueEstimator::ipwe;
  /// Trajectories consistent with the regime at every observed stage.
  int consistent = 0;
  /// AIPWE minus IPWE (zero for IPWE).
  double augmentation = 0.0;
  /// Set when no trajectory follows the regime.
  bool warning = false;
};

/// Propensity models for every stage, fitted on the rows reaching it.
std::vector<PropensityModel> fit_propensities(const Dataset& data,
                                              const std::vector<FeatureMap>& features,
                                              int* clipped = nullptr);

/// Inverse-probability (optionally augmented) value estimates for many
/// regimes on one dataset. Propensities and fitted Q-values at the observed
/// histories are computed once.
class PolicyEvaluator {
 public:
  PolicyEvaluator(const Dataset& data, const std::vector<PropensityModel>& propensities,
                  const FitResult* q_fit = nullptr);

  const Dataset& data() const noexcept { return *data_; }
  bool has_q() const noexcept { return has_q_; }

  ValueEstimate evaluate(const Regime& regime, ValueEstimator estimator) const;
  ValueEstimate ipwe(const Regime& regime) const { return evaluate(regime, ValueEstimator::ipwe); }
  ValueEstimate aipwe(const Regime& regime) const {
    return evaluate(regime, ValueEstimator::aipwe);
  }

  /// Same as evaluate, with the regime's actions given per row and stage.
  ValueEstimate evaluate_actions(const std::vector<std::vector<std::int8_t>>& actions,
                                 ValueEstimator estimator) const;
  std::vector<std::vector<std::int8_t>> actions_of(const Regime& regime) const;

 private:
  const Dataset* data_;
  bool has_q_ = false;
  // Per row, per observed stage.
  std::vector<std::vector<double>> p1_, q0_, q1_;
};

ValueEstimate ipwe_value(const Dataset& data, const Regime& regime,
                         const std::vector<PropensityModel>& propensities);
ValueEstimate aipwe_value(const Dataset& data, const Regime& regime,
                          const std::vector<PropensityModel>& propensities, const FitResult& q_fit);

struct ThresholdSpec {
  VariableRef variable;
  std::string name;
  Direction direction = Direction::below;
  /// Admissible cutoffs; the search never leaves [lower, upper].
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// Parameterized family of regimes searched by direct value maximization.
struct RegimeClass {
  enum class Family { threshold, normalized_linear, enumeration };
  Family family = Family::threshold;
  std::vector<ThresholdSpec> thresholds;  // one per stage
  std::vector<FeatureMap> linear;         // one per stage
  double coef_bound = 1.0;                // search box [-b, b] per coefficient
  std::vector<Regime> enumeration;

  int stages() const;
  int dimension() const;
  /// Regime for a parameter vector; linear coefficients are normalized to
  /// unit length per stage.
  Regime make(const std::vector<double>& params) const;
};

RegimeClass threshold_class(const Schema& schema, const std::vector<std::string>& variables,
                            const std::vector<Direction>& directions);

/// Default optimizer: 41 empirical quantiles per threshold (extremes pushed
/// just outside the data so "treat nobody" and "treat everybody" are
/// candidates) followed by a Nelder-Mead polish; seeded multi-start for
/// linear classes.
OptimizerConfig default_search_config(const Dataset& data, const RegimeClass& cls,
                                      std::uint64_t seed = 1);

struct SearchResult {
  Regime regime;
  ValueEstimate value;
  std::vector<double> params;
  long evaluations = 0;
};

SearchResult search_optimal_regime(const PolicyEvaluator& evaluator, const RegimeClass& cls,
                                   ValueEstimator estimator, const OptimizerConfig& config);
SearchResult search_optimal_regime(const PolicyEvaluator& evaluator, const RegimeClass& cls,
                                   ValueEstimator estimator);

/// Wraps a search result as a FitResult (method ipwe or aipwe).
FitResult direct_fit_result(const SearchResult& result, ValueEstimator estimator,
                            const std::vector<PropensityModel>& propensities, int clipped);

struct OwlSpec {
  Kernel kernel = Kernel::linear;
  double gamma = 0.0;  // rbf bandwidth; 0 picks the median-distance heuristic
  std::vector<double> c_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
  int folds = 4;
  std::uint64_t seed = 1;
  std::vector<FeatureMap> features;  // decision-function inputs per stage
  double gap_tolerance = 1e-4;
};

/// Backward outcome-weighted learning with weighted hinge loss.
FitResult bowl_fit(const Dataset& data, const OwlSpec& spec,
                   const std::vector<PropensityModel>& propensities);

}  // namespace dtr
