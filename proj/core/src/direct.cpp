#include "dtr/direct.hpp"

#include <algorithm>
#include <cmath>

#include "dtr/error.hpp"

namespace dtr {

std::string to_string(ValueEstimator e) { return e == ValueEstimator::ipwe ? "ipwe" : "aipwe"; }

std::vector<PropensityModel> fit_propensities(const Dataset& data,
                                              const std::vector<FeatureMap>& features,
                                              int* clipped) {
  if (static_cast<int>(features.size()) != data.stages())
    throw ConfigError("expected " + std::to_string(data.stages()) + " propensity formulas");
  std::vector<PropensityModel> out;
  int c = 0;
  for (int j = 1; j <= data.stages(); ++j) {
    if (features[j - 1].empty()) throw ConfigError("propensity features missing", j);
    auto pf = fit_propensity(data, features[j - 1], data.reaching(j));
    c += pf.clipped;
    out.push_back(pf.model);
  }
  if (clipped) *clipped = c;
  return out;
}

PolicyEvaluator::PolicyEvaluator(const Dataset& data,
                                 const std::vector<PropensityModel>& propensities,
                                 const FitResult* q_fit)
    : data_(&data), has_q_(q_fit != nullptr) {
  if (static_cast<int>(propensities.size()) != data.stages())
    throw ConfigError("expected " + std::to_string(data.stages()) + " propensity models");
  const std::size_t n = data.size();
  p1_.resize(n);
  q0_.resize(n);
  q1_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = data[i];
    for (int j = 1; j <= t.terminal_stage(); ++j) {
      const History h = history(t, j);
      p1_[i].push_back(propensities[j - 1](h));
      if (q_fit) {
        q0_[i].push_back(q_fit->q_value(h, 0));
        q1_[i].push_back(q_fit->q_value(h, 1));
      }
    }
  }
}

std::vector<std::vector<std::int8_t>> PolicyEvaluator::actions_of(const Regime& regime) const {
  if (regime.stages() != data_->stages())
    throw ShapeError("regime has " + std::to_string(regime.stages()) + " stages, data has " +
                     std::to_string(data_->stages()));
  std::vector<std::vector<std::int8_t>> d(data_->size());
  for (std::size_t i = 0; i < data_->size(); ++i) {
    const auto& t = (*data_)[i];
    for (int j = 1; j <= t.terminal_stage(); ++j)
      d[i].push_back(static_cast<std::int8_t>(regime.apply(history(t, j))));
  }
  return d;
}

ValueEstimate PolicyEvaluator::evaluate_actions(const std::vector<std::vector<std::int8_t>>& d,
                                                ValueEstimator estimator) const {
  if (estimator == ValueEstimator::aipwe && !has_q_)
    throw ConfigError("AIPWE needs a fitted Q-function");
  ValueEstimate out;
  out.estimator = estimator;
  double ipw = 0.0, aug = 0.0;
  const std::size_t n = data_->size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = (*data_)[i];
    double M = 1.0;
    bool following = true;
    for (int j = 1; j <= t.terminal_stage() && following; ++j) {
      const double p = p1_[i][j - 1];
      const int dj = d[i][j - 1];
      const double lambda = dj == 1 ? 1.0 - p : p;  // P(A_j != d_j | H_j)
      M *= 1.0 - lambda;
      const bool deviates = t.stages[j - 1].action != dj;
      if (estimator == ValueEstimator::aipwe) {
        const double q = dj == 1 ? q1_[i][j - 1] : q0_[i][j - 1];
        aug += ((deviates ? 1.0 : 0.0) - lambda) / M * q;
      }
      if (deviates) following = false;
    }
    if (following) {
      ++out.consistent;
      ipw += t.outcome / M;
    }
  }
  ipw /= static_cast<double>(n);
  aug /= static_cast<double>(n);
  out.augmentation = estimator == ValueEstimator::aipwe ? aug : 0.0;
  out.value = ipw + out.augmentation;
  if (out.consistent == 0) {
    out.value = 0.0;
    out.augmentation = 0.0;
    out.warning = true;
  }
  return out;
}

ValueEstimate PolicyEvaluator::evaluate(const Regime& regime, ValueEstimator estimator) const {
  return evaluate_actions(actions_of(regime), estimator);
}

ValueEstimate ipwe_value(const Dataset& data, const Regime& regime,
                         const std::vector<PropensityModel>& propensities) {
  return PolicyEvaluator(data, propensities).ipwe(regime);
}

ValueEstimate aipwe_value(const Dataset& data, const Regime& regime,
                          const std::vector<PropensityModel>& propensities,
                          const FitResult& q_fit) {
  if (static_cast<int>(q_fit.stages.size()) != data.stages())
    throw ShapeError("Q-function fit and data have different stage counts");
  return PolicyEvaluator(data, propensities, &q_fit).aipwe(regime);
}

int RegimeClass::stages() const {
  switch (family) {
    case Family::threshold: return static_cast<int>(thresholds.size());
    case Family::normalized_linear: return static_cast<int>(linear.size());
    case Family::enumeration: return enumeration.empty() ? 0 : enumeration.front().stages();
  }
  return 0;
}

int RegimeClass::dimension() const {
  switch (family) {
    case Family::threshold: return static_cast<int>(thresholds.size());
    case Family::normalized_linear: {
      int d = 0;
      for (const auto& m : linear) d += m.size();
      return d;
    }
    case Family::enumeration: return 1;
  }
  return 0;
}

Regime RegimeClass::make(const std::vector<double>& params) const {
  if (static_cast<int>(params.size()) != dimension())
    throw ShapeError("regime class expects " + std::to_string(dimension()) + " parameters");
  std::vector<Rule> rules;
  switch (family) {
    case Family::threshold:
      for (std::size_t j = 0; j < thresholds.size(); ++j)
        rules.push_back(ThresholdRule{thresholds[j].variable, thresholds[j].name, params[j],
                                      thresholds[j].direction});
      return Regime(std::move(rules));
    case Family::normalized_linear: {
      std::size_t at = 0;
      for (const auto& m : linear) {
        Eigen::VectorXd c(m.size());
        for (int k = 0; k < m.size(); ++k) c[k] = params[at++];
        const double norm = c.norm();
        if (norm > 0) c /= norm;
        rules.push_back(LinearSignRule{m, c});
      }
      return Regime(std::move(rules));
    }
    case Family::enumeration: {
      const auto k = static_cast<long>(std::llround(params[0]));
      if (k < 0 || k >= static_cast<long>(enumeration.size()))
        throw IndexError("enumeration index out of range");
      return enumeration[static_cast<std::size_t>(k)];
    }
  }
  return {};
}

RegimeClass threshold_class(const Schema& schema, const std::vector<std::string>& variables,
                            const std::vector<Direction>& directions) {
  if (static_cast<int>(variables.size()) != schema.stages() ||
      directions.size() != variables.size())
    throw ConfigError("threshold class needs one variable and direction per stage");
  RegimeClass cls;
  cls.family = RegimeClass::Family::threshold;
  for (int j = 1; j <= schema.stages(); ++j) {
    const auto& name = variables[j - 1];
    auto ref = schema.find(name);
    if (!ref) throw ConfigError("unknown threshold variable '" + name + "'", j);
    if (ref->stage > j)
      throw ConfigError("threshold variable '" + name + "' is observed after stage " +
                            std::to_string(j),
                        j);
    cls.thresholds.push_back({*ref, name, directions[j - 1]});
  }
  return cls;
}

namespace {

// Quantile with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

OptimizerConfig default_search_config(const Dataset& data, const RegimeClass& cls,
                                      std::uint64_t seed) {
  OptimizerConfig cfg;
  cfg.seed = seed;
  switch (cls.family) {
    case RegimeClass::Family::threshold: {
      constexpr int points = 41;
      cfg.method = OptimizerMethod::grid_then_nelder_mead;
      for (std::size_t j = 0; j < cls.thresholds.size(); ++j) {
        const auto& v = cls.thresholds[j].variable;
        std::vector<double> x;
        for (auto r : data.reaching(static_cast<int>(j) + 1))
          x.push_back(data[r].stages[v.stage - 1].covariates[v.index]);
        std::sort(x.begin(), x.end());
        const double range = x.back() - x.front();
        const double delta = range > 0 ? 1e-3 * range : 1.0;
        std::vector<double> g;
        for (int k = 0; k < points; ++k) g.push_back(quantile_sorted(x, k / double(points - 1)));
        g.front() = x.front() - delta;
        g.back() = x.back() + delta;
        const auto& spec = cls.thresholds[j];
        if (!(spec.lower < spec.upper))
          throw ConfigError("empty cutoff range for threshold on " + spec.name,
                            static_cast<int>(j) + 1);
        for (auto& c : g) c = std::clamp(c, spec.lower, spec.upper);
        g.erase(std::unique(g.begin(), g.end()), g.end());
        cfg.grid.push_back(std::move(g));
        cfg.lower.push_back(spec.lower);
        cfg.upper.push_back(spec.upper);
      }
      double total = 1.0;
      for (const auto& g : cfg.grid) total *= static_cast<double>(g.size());
      // The surface is piecewise constant, so the polish only needs a short budget.
      cfg.max_evaluations = static_cast<long>(total) + 50 * static_cast<long>(cfg.grid.size()) + 100;
      cfg.simplex_tolerance = 1e-6;
      break;
    }
    case RegimeClass::Family::normalized_linear: {
      const int d = cls.dimension();
      cfg.method = OptimizerMethod::multi_start;
      cfg.lower.assign(static_cast<std::size_t>(d), -cls.coef_bound);
      cfg.upper.assign(static_cast<std::size_t>(d), cls.coef_bound);
      cfg.random_starts = 20;
      cfg.max_evaluations = 20 * 500;
      cfg.simplex_tolerance = 1e-6;
      break;
    }
    case RegimeClass::Family::enumeration: {
      cfg.method = OptimizerMethod::grid;
      std::vector<double> g;
      for (std::size_t k = 0; k < cls.enumeration.size(); ++k) g.push_back(static_cast<double>(k));
      cfg.grid = {g};
      cfg.max_evaluations = static_cast<long>(g.size());
      break;
    }
  }
  return cfg;
}

SearchResult search_optimal_regime(const PolicyEvaluator& evaluator, const RegimeClass& cls,
                                   ValueEstimator estimator, const OptimizerConfig& config) {
  if (cls.stages() != evaluator.data().stages())
    throw ConfigError("regime class has " + std::to_string(cls.stages()) + " stages, data has " +
                      std::to_string(evaluator.data().stages()));
  if (cls.family == RegimeClass::Family::enumeration && cls.enumeration.empty())
    throw ConfigError("regime enumeration is empty");
  if (cls.family == RegimeClass::Family::normalized_linear) {
    for (const auto& m : cls.linear)
      if (m.empty()) throw ConfigError("linear regime class has an empty stage formula");
  }
  Objective f = [&](const std::vector<double>& p) {
    return evaluator.evaluate(cls.make(p), estimator).value;
  };
  auto opt = maximize(f, config);
  SearchResult out;
  out.params = opt.argmax;
  out.regime = cls.make(opt.argmax);
  out.value = evaluator.evaluate(out.regime, estimator);
  out.evaluations = opt.evaluations;
  if (cls.family == RegimeClass::Family::normalized_linear) {
    std::size_t at = 0;
    for (const auto& r : out.regime.rules()) {
      const auto& c = std::get<LinearSignRule>(r).coef;
      for (Eigen::Index k = 0; k < c.size(); ++k) out.params[at++] = c[k];
    }
  }
  return out;
}

SearchResult search_optimal_regime(const PolicyEvaluator& evaluator, const RegimeClass& cls,
                                   ValueEstimator estimator) {
  return search_optimal_regime(evaluator, cls, estimator,
                               default_search_config(evaluator.data(), cls));
}

FitResult direct_fit_result(const SearchResult& result, ValueEstimator estimator,
                            const std::vector<PropensityModel>& propensities, int clipped) {
  FitResult fit;
  fit.method = estimator == ValueEstimator::ipwe ? Method::ipwe : Method::aipwe;
  fit.regime = result.regime;
  for (int j = 1; j <= result.regime.stages(); ++j) {
    StageFit sf;
    sf.stage = j;
    if (static_cast<std::size_t>(j) <= propensities.size()) {
      sf.propensity = propensities[j - 1];
      sf.alpha = propensities[j - 1].coef();
    }
    if (j == 1) sf.clipped = clipped;
    fit.stages.push_back(std::move(sf));
  }
  if (result.value.warning) fit.warnings.push_back("no trajectory follows the selected regime");
  return fit;
}

}  // namespace dtr
