#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "dtr/direct.hpp"
#include "dtr/error.hpp"
#include "dtr/indirect.hpp"
#include "dtr/rng.hpp"
#include "dtr/simlab.hpp"
#include "toy.hpp"

using namespace dtr;

namespace {

Rule always(const Schema& s, int stage, int action) {
  return ExpressionRule{Expression::compile(action ? "1" : "0", s, stage)};
}

std::vector<PropensityModel> constant_props(int K, double p) {
  std::vector<PropensityModel> out;
  for (int j = 1; j <= K; ++j) out.push_back(PropensityModel::constant(j, p));
  return out;
}

std::vector<PropensityModel> case1_props(const Dataset& d) {
  const auto& s = d.schema();
  return fit_propensities(d, {FeatureMap::parse("1,L1", s, 1), FeatureMap::parse("1,L2", s, 2)});
}

// Inverse-probability weighted value written out directly.
double ipwe_oracle(const Dataset& d, const std::vector<PropensityModel>& props,
                   const std::function<int(const History&)>& rule) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double prob = 1.0;
    bool ok = true;
    for (int j = 1; j <= d[i].terminal_stage(); ++j) {
      auto h = history(d[i], j);
      const int a = d[i].stages[j - 1].action;
      if (rule(h) != a) {
        ok = false;
        break;
      }
      prob *= props[j - 1].prob(h, a);
    }
    if (ok) total += d[i].outcome / prob;
  }
  return total / static_cast<double>(d.size());
}

std::vector<double> plateau_cutoffs(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  x.erase(std::unique(x.begin(), x.end()), x.end());
  std::vector<double> c{x.front() - 1.0};
  for (std::size_t k = 0; k + 1 < x.size(); ++k) c.push_back(0.5 * (x[k] + x[k + 1]));
  c.push_back(x.back() + 1.0);
  return c;
}

}  // namespace

TEST_CASE("IPWE on two consistent trajectories") {
  auto d = toy::wide({{"L1"}, {"L2"}}, {{1, 1, 1, 1, 10}, {2, 1, 2, 1, 20}});
  const auto& s = d.schema();
  Regime treat({always(s, 1, 1), always(s, 2, 1)});
  auto v = ipwe_value(d, treat, constant_props(2, 0.5));
  CHECK(v.value == 60.0);
  CHECK(v.consistent == 2);
  CHECK_FALSE(v.warning);

  Regime never({always(s, 1, 0), always(s, 2, 0)});
  auto none = ipwe_value(d, never, constant_props(2, 0.5));
  CHECK(none.value == 0.0);
  CHECK(none.consistent == 0);
  CHECK(none.warning);
}

TEST_CASE("single-stage IPWE is the Horvitz-Thompson mean") {
  auto d = toy::wide({{"X"}}, {{0, 1, 3}, {1, 0, 5}, {2, 1, 7}, {3, 1, 2}, {4, 0, 4}});
  const auto& s = d.schema();
  Regime treat({always(s, 1, 1)});
  // Treated outcomes 3, 7, 2 over 5 rows with P(A = 1) = 3/5.
  CHECK(ipwe_value(d, treat, constant_props(1, 0.6)).value == doctest::Approx(4.0).epsilon(1e-14));
  auto fitted = fit_propensities(d, {FeatureMap::parse("1", s, 1)});
  CHECK(ipwe_value(d, treat, fitted).value == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("AIPWE with a zero Q-function equals IPWE") {
  auto d = generate_case1(500, 4);
  auto zero = d.trajectories();
  for (auto& t : zero) t.outcome = 0.0;
  auto qzero = q_learning_fit(Dataset(d.schema(), zero), case1_specs(d.schema()));
  auto props = case1_props(d);
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    Regime r({ThresholdRule{{1, 0}, "L1", rng.normal(300, 100), Direction::below},
              ThresholdRule{{2, 0}, "L2", rng.normal(400, 100), Direction::below}});
    const auto ip = ipwe_value(d, r, props);
    const auto ai = aipwe_value(d, r, props, qzero);
    CHECK(std::abs(ai.value - ip.value) <= 1e-12 * (1 + std::abs(ip.value)));
    CHECK(ai.augmentation == 0.0);
    CHECK(ip.value == doctest::Approx(ipwe_oracle(d, props, [&](const History& h) {
                                        return r.apply(h);
                                      })).epsilon(1e-12));
  }
}

TEST_CASE("AIPWE with a saturated Q-function equals the plug-in value") {
  auto d = toy::wide({{"X"}},
                     {{0, 1, 4}, {0, 0, 2}, {0, 1, 6}, {1, 0, 3}, {1, 1, 1}, {1, 0, 5}});
  const auto& s = d.schema();
  std::vector<StageModelSpec> specs{
      {FeatureMap::parse("1,X", s, 1), FeatureMap::parse("1,X", s, 1), {}}};
  auto q = q_learning_fit(d, specs);
  auto props = fit_propensities(d, {FeatureMap::parse("1,X", s, 1)});
  Regime r({ExpressionRule{Expression::compile("X < 0.5", s, 1)}});
  // Cell means: X = 0 treated 5; X = 1 control 4.
  CHECK(aipwe_value(d, r, props, q).value == doctest::Approx(4.5).epsilon(1e-9));
}

TEST_CASE("grid search matches exhaustive enumeration of threshold regimes") {
  auto d = generate_case1(20, 77);
  const auto& s = d.schema();
  auto props = case1_props(d);
  auto cls = threshold_class(s, {"L1", "L2"}, {Direction::below, Direction::below});
  PolicyEvaluator ev(d, props);
  auto found = search_optimal_regime(ev, cls, ValueEstimator::ipwe);

  std::vector<double> x1, x2;
  for (std::size_t i = 0; i < d.size(); ++i) {
    x1.push_back(d[i].stages[0].covariates[0]);
    x2.push_back(d[i].stages[1].covariates[0]);
  }
  double best = -INFINITY, best_oracle = -INFINITY;
  for (double c1 : plateau_cutoffs(x1)) {
    for (double c2 : plateau_cutoffs(x2)) {
      Regime r = cls.make({c1, c2});
      best = std::max(best, ev.ipwe(r).value);
      best_oracle = std::max(best_oracle, ipwe_oracle(d, props, [&](const History& h) {
        return h.stage() == 1 ? int(h.covariate(1, 0) < c1) : int(h.covariate(2, 0) < c2);
      }));
    }
  }
  CHECK(found.value.value == best);
  CHECK(std::abs(best - best_oracle) <= 1e-12 * std::abs(best));
  CHECK(ev.ipwe(found.regime).value == found.value.value);
}

TEST_CASE("IPWE ignores regime changes between data points") {
  auto d = generate_case1(200, 13);
  auto props = case1_props(d);
  std::vector<double> x;
  for (std::size_t i = 0; i < d.size(); ++i) x.push_back(d[i].stages[1].covariates[0]);
  std::sort(x.begin(), x.end());
  for (std::size_t k = 0; k + 1 < x.size(); k += 17) {
    const double lo = x[k] + 0.01 * (x[k + 1] - x[k]), hi = x[k + 1];
    Regime a({ThresholdRule{{1, 0}, "L1", 250, Direction::below},
              ThresholdRule{{2, 0}, "L2", lo, Direction::below}});
    Regime b({ThresholdRule{{1, 0}, "L1", 250, Direction::below},
              ThresholdRule{{2, 0}, "L2", hi, Direction::below}});
    CHECK(ipwe_value(d, a, props).value == ipwe_value(d, b, props).value);
  }
}

TEST_CASE("enumerated and single-regime classes") {
  auto d = generate_case1(300, 21);
  const auto& s = d.schema();
  auto props = case1_props(d);
  PolicyEvaluator ev(d, props);

  RegimeClass cls;
  cls.family = RegimeClass::Family::enumeration;
  for (double c1 : {-1e9, 250.0, 1e9})
    for (double c2 : {360.0, 1e9})
      cls.enumeration.push_back(Regime({ThresholdRule{{1, 0}, "L1", c1, Direction::below},
                                        ThresholdRule{{2, 0}, "L2", c2, Direction::below}}));
  REQUIRE(cls.enumeration.size() == 6);
  double best = -INFINITY;
  for (const auto& r : cls.enumeration) best = std::max(best, ev.ipwe(r).value);
  auto found = search_optimal_regime(ev, cls, ValueEstimator::ipwe);
  CHECK(found.value.value == best);
  CHECK(found.evaluations >= 6);

  RegimeClass one;
  one.family = RegimeClass::Family::enumeration;
  one.enumeration = {cls.enumeration[3]};
  auto only = search_optimal_regime(ev, one, ValueEstimator::ipwe);
  CHECK(only.value.value == ev.ipwe(cls.enumeration[3]).value);

  RegimeClass empty;
  empty.family = RegimeClass::Family::enumeration;
  CHECK_THROWS_AS(search_optimal_regime(ev, empty, ValueEstimator::ipwe), ConfigError);
  CHECK_THROWS_AS(search_optimal_regime(ev, cls, ValueEstimator::aipwe), ConfigError);
  (void)s;
}

TEST_CASE("normalized linear class returns unit-norm coefficients") {
  auto d = generate_case1(300, 22);
  const auto& s = d.schema();
  auto props = case1_props(d);
  auto q = q_learning_fit(d, case1_specs(s));
  PolicyEvaluator ev(d, props, &q);
  RegimeClass cls;
  cls.family = RegimeClass::Family::normalized_linear;
  cls.linear = {FeatureMap::parse("1,{L1 / 100}", s, 1), FeatureMap::parse("1,{L2 / 100}", s, 2)};
  cls.coef_bound = 5.0;
  auto r = search_optimal_regime(ev, cls, ValueEstimator::aipwe, default_search_config(d, cls, 3));
  REQUIRE(r.params.size() == 4);
  CHECK(std::hypot(r.params[0], r.params[1]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::hypot(r.params[2], r.params[3]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev.aipwe(r.regime).value == r.value.value);
  Regime scaled = cls.make({3 * r.params[0], 3 * r.params[1], 0.5 * r.params[2], 0.5 * r.params[3]});
  CHECK(ev.aipwe(scaled).value == r.value.value);
}

TEST_CASE("propensities are clipped and the consistency product only shrinks") {
  const Schema s({{"L1"}});
  Eigen::VectorXd coef(2);
  coef << 0.0, 1.0;
  PropensityModel m(FeatureMap::parse("1,L1", s, 1), coef);
  std::vector<StageObs> hi{{{50.0}, 0}}, lo{{{-50.0}, 0}};
  bool clipped = false;
  CHECK(m.predict(History(1, hi), &clipped) == 1.0 - kPropensityClip);
  CHECK(clipped);
  CHECK(m(History(1, lo)) == kPropensityClip);

  auto d = generate_case1(300, 23);
  auto props = case1_props(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double M = 1.0;
    for (int j = 1; j <= 2; ++j) {
      const double p = props[j - 1](history(d[i], j));
      REQUIRE(p >= kPropensityClip);
      REQUIRE(p <= 1 - kPropensityClip);
      const double next = M * (d[i].stages[j - 1].action ? p : 1 - p);
      REQUIRE(next > 0);
      REQUIRE(next <= M);
      M = next;
    }
  }
}

TEST_CASE("weighted SVM reaches the primal optimum") {
  Rng rng(6);
  const int n = 30;
  Eigen::MatrixXd X(n, 2);
  std::vector<int> y(n);
  Eigen::VectorXd box(n);
  for (int i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.5) ? 1 : -1;
    X(i, 0) = rng.normal(0.8 * y[i], 1);
    X(i, 1) = rng.normal(-0.5 * y[i], 1);
    box[i] = 0.2 + rng.uniform();
  }
  const Eigen::MatrixXd K = kernel_matrix(Kernel::linear, 0.0, X, X);
  auto sol = solve_weighted_svm(K, y, box, 1e-8);
  CHECK(sol.converged);
  Eigen::Vector2d w = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) w += sol.alpha[i] * y[i] * X.row(i).transpose();
  auto primal = [&](const Eigen::Vector2d& v, double b) {
    double s = 0.5 * v.squaredNorm();
    for (int i = 0; i < n; ++i) s += box[i] * std::max(0.0, 1 - y[i] * (X.row(i).dot(v) + b));
    return s;
  };
  const double at = primal(w, sol.intercept);
  CHECK(at == doctest::Approx(sol.primal).epsilon(1e-9));
  CHECK(sol.primal - sol.dual <= 1e-6 * (1 + std::abs(sol.primal)));
  for (int k = 0; k < 300; ++k) {
    Eigen::Vector2d v = w + 0.05 * Eigen::Vector2d(rng.normal(), rng.normal());
    REQUIRE(at <= primal(v, sol.intercept + 0.05 * rng.normal()) + 1e-6 * (1 + at));
  }
  for (int i = 0; i < n; ++i) {
    REQUIRE(sol.alpha[i] >= 0);
    REQUIRE(sol.alpha[i] <= box[i] * (1 + 1e-12));
  }
}

TEST_CASE("best intercept agrees with a scan over the hinge breakpoints") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 15;
    Eigen::VectorXd g(n), box(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      g[i] = rng.normal(0, 2);
      y[i] = rng.bernoulli(0.4) ? 1 : -1;
      box[i] = rng.uniform();
    }
    auto loss = [&](double b) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += box[i] * std::max(0.0, 1 - y[i] * (g[i] + b));
      return s;
    };
    double best = INFINITY;
    for (int i = 0; i < n; ++i) best = std::min(best, loss(y[i] - g[i]));
    auto [b, v] = best_intercept(g, y, box);
    CHECK(v == doctest::Approx(best).epsilon(1e-12));
    CHECK(loss(b) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("BOWL separates a separable toy") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 40; ++i) {
    const double x = i < 20 ? -2.0 + 0.05 * i : 0.1 + 0.05 * (i - 20);
    rows.push_back({x, x > 0 ? 1.0 : 0.0, 1.0});
  }
  auto d = toy::wide({{"x"}}, rows);
  const auto& s = d.schema();
  OwlSpec spec;
  spec.features = {FeatureMap::parse("x", s, 1, false)};
  auto fit = bowl_fit(d, spec, constant_props(1, 0.5));
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(fit.regime.apply(history(d[i], 1)) == d[i].stages[0].action);
  CHECK(fit.stage(1).objective <= fit.stage(1).zero_objective);
}

TEST_CASE("BOWL is unchanged by rescaling or shifting the outcome") {
  auto d = generate_case2(300, 41);
  const auto& s = d.schema();
  auto rows = d.trajectories();
  auto scaled = rows, shifted = rows;
  for (auto& t : scaled) t.outcome *= 2;
  for (auto& t : shifted) t.outcome += 250;
  OwlSpec spec;
  spec.features = {FeatureMap::parse("L11,L12", s, 1, false),
                   FeatureMap::parse("L21,L22", s, 2, false),
                   FeatureMap::parse("L31,L32", s, 3, false)};
  spec.c_grid = {1.0};
  // A shift changes the weights only by rounding, so the solver must be run
  // well past its default stopping point for the fits to coincide.
  spec.gap_tolerance = 1e-12;
  auto props = fit_propensities(d, {FeatureMap::parse("1,W", s, 1),
                                    FeatureMap::parse("1,L21,L22", s, 2),
                                    FeatureMap::parse("1,L31", s, 3)});
  auto base = bowl_fit(d, spec, props);
  auto f2 = bowl_fit(Dataset(s, scaled), spec, props);
  auto f3 = bowl_fit(Dataset(s, shifted), spec, props);
  auto test = generate_case2(500, 42);
  double worst = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (int j = 1; j <= 3; ++j) {
      auto h = history(test[i], j);
      REQUIRE(base.regime.apply(h) == f2.regime.apply(h));
      const double a = rule_score(base.regime.rule(j), h), b = rule_score(f3.regime.rule(j), h);
      worst = std::max(worst, std::abs(a - b) / (1 + std::abs(a)));
    }
  }
  CHECK(worst <= 1e-8);
  for (int j = 1; j <= 3; ++j) CHECK(base.stage(j).objective <= base.stage(j).zero_objective);

  // Rows entering stage j follow the fitted rules at every later stage.
  std::size_t follow_later = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    bool ok = true;
    for (int k = 2; k <= 3; ++k)
      ok = ok && base.regime.apply(history(d[i], k)) == d[i].stages[k - 1].action;
    follow_later += ok;
  }
  CHECK(base.stage(1).rows == static_cast<int>(follow_later));
  CHECK(base.stage(3).rows == static_cast<int>(d.size()));
}

TEST_CASE("BOWL falls back to a constant rule when one action is observed") {
  std::vector<std::vector<double>> rows;
  Rng rng(3);
  for (int i = 0; i < 30; ++i) rows.push_back({rng.normal(), 1.0, rng.normal(10, 1)});
  auto d = toy::wide({{"x"}}, rows);
  OwlSpec spec;
  spec.features = {FeatureMap::parse("x", d.schema(), 1, false)};
  auto fit = bowl_fit(d, spec, constant_props(1, 0.5));
  CHECK_FALSE(fit.warnings.empty());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(fit.regime.apply(history(d[i], 1)) == 1);
}
