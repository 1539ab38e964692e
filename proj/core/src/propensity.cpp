#include "dtr/propensity.hpp"

#include <algorithm>
#include <cmath>

#include "dtr/error.hpp"

namespace dtr {

PropensityModel::PropensityModel(FeatureMap features, Eigen::VectorXd coef, double clip)
    : features_(std::move(features)), coef_(std::move(coef)), clip_(clip), stage_(features_.stage()) {
  if (coef_.size() != features_.size())
    throw ShapeError("propensity coefficients do not match the feature map", stage_);
  if (!(clip_ >= 0.0 && clip_ < 0.5)) throw ConfigError("propensity clip must be in [0, 0.5)");
}

PropensityModel PropensityModel::constant(int stage, double p, double clip) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("constant propensity must be in (0, 1)", stage);
  PropensityModel m;
  m.stage_ = stage;
  m.clip_ = clip;
  m.constant_ = true;
  m.p_ = p;
  return m;
}

double PropensityModel::predict(const History& h, bool* clipped) const {
  double p;
  if (constant_) {
    p = p_;
  } else {
    const double eta = coef_.dot(features_(h));
    p = eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
  }
  const double c = std::clamp(p, clip_, 1.0 - clip_);
  if (clipped) *clipped = c != p;
  return c;
}

double PropensityModel::operator()(const History& h) const { return predict(h, nullptr); }

PropensityFit fit_propensity(const Dataset& data, const FeatureMap& features,
                             const std::vector<std::size_t>& rows, const LogisticOptions& options) {
  const int j = features.stage();
  try {
    DesignMatrix X{design(features, data, rows), features.labels()};
    std::vector<int> a(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) a[r] = data[rows[r]].stages[j - 1].action;
    PropensityFit out;
    out.logistic = logistic_fit(X, a, options);
    out.model = PropensityModel(features, out.logistic.coef);
    out.fitted.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      bool c = false;
      out.fitted[static_cast<Eigen::Index>(r)] = out.model.predict(history(data[rows[r]], j), &c);
      out.clipped += c;
    }
    return out;
  } catch (...) {
    rethrow_at_stage(j);
  }
}

}  // namespace dtr
