#pragma once

#include <vector>

#include "dtr/data.hpp"
#include "dtr/features.hpp"
#include "dtr/fit.hpp"

namespace dtr {

/// Feature maps for one stage: contrast r_j, treatment-free D_j and the
/// propensity design.
struct StageModelSpec {
  FeatureMap contrast;
  FeatureMap tfree;
  FeatureMap propensity;
};

/// Backward-induction Q-learning with linear stage models
/// Q_j = A_j r_j' psi_j + D_j' xi_j fitted by OLS.
FitResult q_learning_fit(const Dataset& data, const std::vector<StageModelSpec>& specs);

/// A-learning with the estimation variant given by `method`
/// (a1, a2, a3, a4 or dwols).
FitResult a_learning_fit(const Dataset& data, const std::vector<StageModelSpec>& specs,
                         Method method);

/// Regret from blip values gamma(h, a) over the actions: max gamma - gamma.
std::vector<double> blip_to_regret(const std::vector<double>& blip);
/// Blip (relative to action 0) from regret values: mu(0) - mu(a).
std::vector<double> regret_to_blip(const std::vector<double>& regret);

/// Specs used for the two-stage simulated example: r_j = (1, L_j),
/// D_2 = (1, L1, A1, L1:A1, L2), D_1 = (1, L1), propensities on (1, L_j).
std::vector<StageModelSpec> case1_specs(const Schema& schema);

}  // namespace dtr
