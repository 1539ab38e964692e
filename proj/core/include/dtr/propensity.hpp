#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dtr/data.hpp"
#include "dtr/features.hpp"
#include "dtr/stats.hpp"

namespace dtr {

inline constexpr double kPropensityClip = 1e-3;

/// Fitted model for P(A_j = 1 | H_j). Predictions are clipped to
/// [clip, 1 - clip] before any use as a weight.
class PropensityModel {
 public:
  PropensityModel() = default;
  PropensityModel(FeatureMap features, Eigen::VectorXd coef, double clip = kPropensityClip);
  /// Known constant probability (randomized designs, toy examples).
  static PropensityModel constant(int stage, double p, double clip = kPropensityClip);

  int stage() const noexcept { return stage_; }
  double clip() const noexcept { return clip_; }
  const FeatureMap& features() const noexcept { return features_; }
  const Eigen::VectorXd& coef() const noexcept { return coef_; }

  /// Clipped P(A = 1 | h).
  double operator()(const History& h) const;
  /// Clipped probability and whether clipping changed it.
  double predict(const History& h, bool* clipped) const;
  /// Clipped P(A = a | h).
  double prob(const History& h, int a) const {
    const double p = (*this)(h);
    return a == 1 ? p : 1.0 - p;
  }

 private:
  FeatureMap features_;
  Eigen::VectorXd coef_;
  double clip_ = kPropensityClip;
  int stage_ = 0;
  bool constant_ = false;
  double p_ = 0.5;
};

struct PropensityFit {
  PropensityModel model;
  LogisticFit logistic;
  /// Clipped fitted values for the rows used in the fit.
  Eigen::VectorXd fitted;
  int clipped = 0;
};

/// Logistic fit of A_j on the feature map over `rows`.
PropensityFit fit_propensity(const Dataset& data, const FeatureMap& features,
                             const std::vector<std::size_t>& rows,
                             const LogisticOptions& options = {});

}  // namespace dtr
