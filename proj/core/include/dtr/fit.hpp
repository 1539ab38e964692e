#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dtr/features.hpp"
#include "dtr/propensity.hpp"
#include "dtr/regime.hpp"

namespace dtr {

enum class Method { q, a1, a2, a3, a4, dwols, ctree, ipwe, aipwe, bowl };

std::string to_string(Method m);
/// Throws ConfigError listing the valid names.
Method parse_method(const std::string& name);
const std::vector<std::string>& method_names();

/// Per-stage estimates and diagnostics. Fields that do not apply to a method
/// stay empty.
struct StageFit {
  int stage = 0;
  int rows = 0;  // trajectories used at this stage
  FeatureMap contrast, tfree;
  Eigen::VectorXd psi, xi;
  std::optional<PropensityModel> propensity;
  Eigen::VectorXd alpha;
  int clipped = 0;
  double condition = 0.0;
  double ee_residual = 0.0;
  std::shared_ptr<const CausalTree> tree;
  std::shared_ptr<const DecisionFunction> decision;
  double tuning = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  double zero_objective = std::numeric_limits<double>::quiet_NaN();
};

struct FitResult {
  Method method = Method::q;
  Regime regime;
  std::vector<StageFit> stages;
  /// values[j-1][i]: stage-j value column for trajectory i (empty for
  /// direct-search fits).
  std::vector<std::vector<double>> values;
  std::vector<double> mean_values;
  std::vector<std::string> warnings;
  double clip = kPropensityClip;

  int clipped_total() const;
  /// Fitted Q_j(h, a) = a * C_j(h) + m_j(h) from the linear stage models.
  double q_value(const History& h, int action) const;
  const StageFit& stage(int j) const { return stages.at(static_cast<std::size_t>(j - 1)); }
};

}  // namespace dtr
