#pragma once

#include <limits>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "dtr/data.hpp"
#include "dtr/expr.hpp"
#include "dtr/features.hpp"
#include "dtr/svm.hpp"
#include "dtr/tree.hpp"

namespace dtr {

/// Treat iff coef' features(h) > 0.
struct LinearSignRule {
  FeatureMap features;
  Eigen::VectorXd coef;
};

enum class Direction { below, above };

/// Treat iff the covariate is strictly below (or above) the cutoff.
struct ThresholdRule {
  VariableRef variable;
  std::string name;
  double cutoff = 0.0;
  Direction direction = Direction::below;
};

/// Treat iff the leaf contrast is positive.
struct TreeRule {
  std::shared_ptr<const CausalTree> tree;
  FeatureMap features;
};

/// Treat iff the decision function is positive.
struct DecisionFnRule {
  std::shared_ptr<const DecisionFunction> fn;
  FeatureMap features;
};

/// Treat iff the expression evaluates to a positive number.
struct ExpressionRule {
  Expression expr;
};

using Rule = std::variant<LinearSignRule, ThresholdRule, TreeRule, DecisionFnRule, ExpressionRule>;

/// Signed score whose sign decides the action (contrast, decision value,
/// cutoff distance, or expression value).
double rule_score(const Rule& rule, const History& h);
/// 1 iff rule_score > 0; an exact zero gives 0.
int apply_rule(const Rule& rule, const History& h);
/// Short human-readable form, e.g. "treat if L2 < 353".
std::string describe(const Rule& rule);
/// Threshold implied by a rule on a single covariate: the cutoff of a
/// ThresholdRule or -psi0/psi1 for a LinearSignRule on (1, x).
std::optional<double> implied_threshold(const Rule& rule);

class Regime {
 public:
  Regime() = default;
  explicit Regime(std::vector<Rule> rules) : rules_(std::move(rules)) {}

  int stages() const noexcept { return static_cast<int>(rules_.size()); }
  const Rule& rule(int stage) const;
  const std::vector<Rule>& rules() const noexcept { return rules_; }

  /// Action at h.stage(). Throws ShapeError if the regime has no such stage.
  int apply(const History& h) const;

 private:
  std::vector<Rule> rules_;
};

/// First stage at which the observed action departs from the regime, or
/// infinity when the trajectory follows it at every observed stage.
struct ConsistencyIndex {
  static constexpr int infinity = std::numeric_limits<int>::max();
  int stage = infinity;

  bool consistent() const noexcept { return stage == infinity; }
  bool operator==(const ConsistencyIndex&) const = default;
};

ConsistencyIndex consistency_index(const Regime& regime, const Trajectory& t);

}  // namespace dtr
