#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dtr/data.hpp"
#include "dtr/expr.hpp"

namespace dtr {

/// Stage-j feature expansion written as a formula such as "1,L1,A1,L1:A1".
///
/// Terms are comma separated; ':' multiplies factors; "1" is the intercept
/// and "0" suppresses the implicit one; `{...}` embeds an expression. An
/// empty formula or "none" gives the empty map.
class FeatureMap {
 public:
  FeatureMap() = default;
  static FeatureMap parse(const std::string& formula, const Schema& schema, int stage,
                          bool implicit_intercept = true);
  /// (1, name) for a single covariate.
  static FeatureMap intercept_and(const std::string& name, const Schema& schema, int stage);

  int stage() const noexcept { return stage_; }
  int size() const noexcept { return static_cast<int>(terms_.size()); }
  bool empty() const noexcept { return terms_.empty(); }
  const std::string& formula() const noexcept { return formula_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  void evaluate(const History& h, double* out) const;
  Eigen::VectorXd operator()(const History& h) const;

  /// If the map is exactly (intercept, one covariate), the covariate.
  std::optional<VariableRef> intercept_slope() const;

 private:
  struct Factor {
    enum class Kind { covariate, action, expression } kind;
    VariableRef ref;
    int action_stage = 0;
    Expression expr;
  };
  using Term = std::vector<Factor>;  // empty term = intercept

  std::vector<Term> terms_;
  std::vector<std::string> labels_;
  std::string formula_;
  int stage_ = 0;
};

/// Feature matrix with one row per entry of `rows`, evaluated at stage
/// map.stage() of each trajectory.
Eigen::MatrixXd design(const FeatureMap& map, const Dataset& data,
                       const std::vector<std::size_t>& rows);

}  // namespace dtr
