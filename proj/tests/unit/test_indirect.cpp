#include <doctest.h>

#include <cmath>

#include "dtr/error.hpp"
#include "dtr/indirect.hpp"
#include "dtr/rng.hpp"
#include "dtr/simlab.hpp"
#include "toy.hpp"

using namespace dtr;

namespace {

Dataset with_outcomes(const Dataset& d, const std::function<double(const Trajectory&)>& y) {
  auto rows = d.trajectories();
  for (auto& t : rows) t.outcome = y(t);
  return Dataset(d.schema(), rows);
}

std::vector<StageModelSpec> specs_without_tfree(const Schema& s) {
  auto specs = case1_specs(s);
  for (int j = 1; j <= 2; ++j) specs[j - 1].tfree = FeatureMap::parse("none", s, j);
  return specs;
}

Eigen::VectorXd actions_at(const Dataset& d, int j) {
  Eigen::VectorXd a(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) a[i] = d[i].stages[j - 1].action;
  return a;
}

Eigen::VectorXd fitted_propensity(const FitResult& fit, const Dataset& d, int j) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) p[i] = (*fit.stage(j).propensity)(history(d[i], j));
  return p;
}

}  // namespace

TEST_CASE("Q-learning on a constant outcome") {
  auto d = with_outcomes(generate_case1(300, 1), [](const Trajectory&) { return 777.0; });
  auto fit = q_learning_fit(d, case1_specs(d.schema()));
  for (int j = 1; j <= 2; ++j) {
    CHECK(fit.stage(j).psi.lpNorm<Eigen::Infinity>() <= 1e-9);
    for (double v : fit.values[j - 1]) REQUIRE(std::abs(v - 777.0) <= 1e-9);
  }
}

TEST_CASE("Q-learning stage-2 coefficients solve the normal equations") {
  auto d = toy::wide({{"L1"}, {"L2"}}, {{1, 0, 2, 1, 10},
                                        {2, 1, 1, 0, 12},
                                        {3, 0, 5, 1, 15},
                                        {4, 1, 3, 0, 11},
                                        {5, 0, 4, 1, 20},
                                        {6, 1, 7, 0, 14},
                                        {7, 1, 6, 1, 19}});
  const auto& s = d.schema();
  std::vector<StageModelSpec> specs(2);
  specs[0] = {FeatureMap::parse("1,L1", s, 1), FeatureMap::parse("1,L1", s, 1), {}};
  specs[1] = {FeatureMap::parse("1,L2", s, 2), FeatureMap::parse("1,L1,L2", s, 2), {}};
  auto fit = q_learning_fit(d, specs);

  Eigen::MatrixXd X(7, 5);
  Eigen::VectorXd y(7);
  for (int i = 0; i < 7; ++i) {
    const double l1 = d[i].stages[0].covariates[0], l2 = d[i].stages[1].covariates[0];
    const double a = d[i].stages[1].action;
    X.row(i) << a, a * l2, 1, l1, l2;
    y[i] = d[i].outcome;
  }
  Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  CHECK((fit.stage(2).psi - beta.head(2)).norm() <= 1e-9);
  CHECK((fit.stage(2).xi - beta.tail(3)).norm() <= 1e-9);

  // The stage-1 response is the fitted stage-2 value under the estimated rule.
  for (int i = 0; i < 7; ++i) {
    const double c = X(i, 2) * beta[0] + X(i, 4) * beta[1];
    const double m = X.row(i).tail(3).dot(beta.tail(3));
    CHECK(fit.values[1][i] == doctest::Approx((c > 0 ? c : 0.0) + m).epsilon(1e-12));
  }
}

TEST_CASE("Q-learning values can fall below the observed outcome") {
  auto d = generate_case1(500, 3);
  auto fit = q_learning_fit(d, case1_specs(d.schema()));
  int below = 0;
  for (std::size_t i = 0; i < d.size(); ++i) below += fit.values[1][i] < d[i].outcome;
  CHECK(below > 0);
}

TEST_CASE("A-learning value columns are monotone") {
  auto d = generate_case1(800, 5);
  for (Method m : {Method::a1, Method::a2, Method::a3, Method::a4, Method::dwols}) {
    CAPTURE(to_string(m));
    auto fit = a_learning_fit(d, case1_specs(d.schema()), m);
    for (std::size_t i = 0; i < d.size(); ++i) {
      REQUIRE(fit.values[1][i] >= d[i].outcome);
      REQUIRE(fit.values[0][i] >= fit.values[1][i]);
    }
    // Rows that follow the fitted rule carry their value unchanged.
    for (int j = 1; j <= 2; ++j) {
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double next = j == 2 ? d[i].outcome : fit.values[1][i];
        if (fit.regime.apply(history(d[i], j)) == d[i].stages[j - 1].action)
          REQUIRE(fit.values[j - 1][i] == next);
      }
    }
  }
}

TEST_CASE("A1 and A3 coincide without a treatment-free model") {
  auto d = generate_case1(600, 6);
  auto specs = specs_without_tfree(d.schema());
  auto a1 = a_learning_fit(d, specs, Method::a1);
  auto a3 = a_learning_fit(d, specs, Method::a3);
  for (int j = 1; j <= 2; ++j) CHECK(a1.stage(j).psi == a3.stage(j).psi);
}

TEST_CASE("A3 on an eight-row toy matches the hand-built stacked system") {
  auto d = toy::wide({{"L", "X"}}, {{1, 2, 1, 5},
                                    {2, 0, 0, 3},
                                    {3, 1, 1, 8},
                                    {4, 3, 0, 2},
                                    {5, 1, 1, 9},
                                    {6, 2, 0, 4},
                                    {2, 1, 1, 6},
                                    {5, 0, 0, 7}});
  const auto& s = d.schema();
  std::vector<StageModelSpec> specs{{FeatureMap::parse("1,L", s, 1),
                                     FeatureMap::parse("1,X", s, 1),
                                     FeatureMap::parse("1,L", s, 1)}};
  auto fit = a_learning_fit(d, specs, Method::a3);
  Eigen::VectorXd pi = fitted_propensity(fit, d, 1);
  Eigen::VectorXd A = actions_at(d, 1);

  Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
  Eigen::Vector4d b = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double L = d[i].stages[0].covariates[0], X = d[i].stages[0].covariates[1];
    Eigen::Vector4d g(A[i] - pi[i], L * (A[i] - pi[i]), 1, X);
    Eigen::Vector4d x(A[i], A[i] * L, 1, X);
    M += g * x.transpose();
    b += g * d[i].outcome;
  }
  Eigen::Vector4d sol = M.fullPivLu().solve(b);
  CHECK((fit.stage(1).psi - sol.head(2)).lpNorm<Eigen::Infinity>() <= 1e-10);
  CHECK((fit.stage(1).xi - sol.tail(2)).lpNorm<Eigen::Infinity>() <= 1e-10);
  CHECK(fit.stage(1).ee_residual <= 1e-8);
}

TEST_CASE("regression variants match their weighted normal equations") {
  auto d = generate_case1(400, 12);
  auto specs = case1_specs(d.schema());
  const int j = 2;
  Eigen::VectorXd A = actions_at(d, j);
  Eigen::VectorXd y(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) y[i] = d[i].outcome;
  Eigen::MatrixXd R = design(specs[j - 1].contrast, d, d.reaching(j));
  Eigen::MatrixXd D = design(specs[j - 1].tfree, d, d.reaching(j));

  auto a2 = a_learning_fit(d, specs, Method::a2);
  Eigen::VectorXd pi = fitted_propensity(a2, d, j);
  Eigen::MatrixXd X2(R.rows(), 5);
  X2 << A.asDiagonal() * R, pi.asDiagonal() * R, Eigen::VectorXd::Ones(R.rows());
  Eigen::VectorXd b2 = (X2.transpose() * X2).ldlt().solve(X2.transpose() * y);
  CHECK((a2.stage(j).psi - b2.head(2)).norm() <= 1e-8 * b2.norm());

  auto a4 = a_learning_fit(d, specs, Method::a4);
  Eigen::MatrixXd X4(R.rows(), 4 + D.cols());
  X4 << A.asDiagonal() * R, pi.asDiagonal() * R, D;
  Eigen::VectorXd b4 = X4.colPivHouseholderQr().solve(y);
  CHECK((a4.stage(j).psi - b4.head(2)).norm() <= 1e-7 * b4.norm());

  auto dw = a_learning_fit(d, specs, Method::dwols);
  Eigen::VectorXd w = (A - pi).cwiseAbs();
  Eigen::MatrixXd Xd(R.rows(), 2 + D.cols());
  Xd << A.asDiagonal() * R, D;
  Eigen::VectorXd bd = (Xd.transpose() * w.asDiagonal() * Xd)
                           .colPivHouseholderQr()
                           .solve(Xd.transpose() * w.asDiagonal() * y);
  CHECK((dw.stage(j).psi - bd.head(2)).norm() <= 1e-7 * bd.norm());
}

TEST_CASE("A2 and A4 contrast coefficients ignore a shift of the outcome") {
  auto d = generate_case1(500, 8);
  auto shifted = with_outcomes(d, [](const Trajectory& t) { return t.outcome + 5000.0; });
  for (Method m : {Method::a2, Method::a4}) {
    auto f0 = a_learning_fit(d, case1_specs(d.schema()), m);
    auto f1 = a_learning_fit(shifted, case1_specs(d.schema()), m);
    for (int j = 1; j <= 2; ++j)
      CHECK((f0.stage(j).psi - f1.stage(j).psi).norm() <= 1e-7 * (1 + f0.stage(j).psi.norm()));
  }
}

TEST_CASE("A3 recovers the case-1 stage-2 contrast in magnitude") {
  auto d = generate_case1(1000, 2);
  auto fit = a_learning_fit(d, case1_specs(d.schema()), Method::a3);
  const auto& psi = fit.stage(2).psi;
  CHECK(psi[0] > 500);
  CHECK(psi[0] < 950);
  CHECK(psi[1] < -1.4);
  CHECK(psi[1] > -2.6);
  const double tau = implied_threshold(fit.regime.rule(2)).value();
  CHECK(std::abs(tau - 360) < 30);
}

TEST_CASE("early-terminated trajectories contribute only where observed") {
  auto full = generate_case1(400, 9);
  auto rows = full.trajectories();
  for (std::size_t i = 0; i < rows.size(); i += 4) rows[i].stages.resize(1);
  Dataset d(full.schema(), rows);
  for (Method m : {Method::q, Method::a3}) {
    auto fit = m == Method::q ? q_learning_fit(d, case1_specs(d.schema()))
                              : a_learning_fit(d, case1_specs(d.schema()), m);
    CHECK(fit.stage(2).rows == 300);
    CHECK(fit.stage(1).rows == 400);
    for (std::size_t i = 0; i < rows.size(); i += 4) CHECK(fit.values[1][i] == d[i].outcome);
  }
}

TEST_CASE("stage errors carry the stage number") {
  auto d = generate_case1(200, 1);
  const auto& s = d.schema();
  auto specs = case1_specs(s);
  specs[1].tfree = FeatureMap::parse("1,L1,L2,{2 * L2}", s, 2);
  try {
    q_learning_fit(d, specs);
    FAIL("expected a singular design");
  } catch (const SingularError& e) {
    CHECK(e.stage() == 2);
  }
  CHECK_THROWS_AS(a_learning_fit(d, specs, Method::ctree), ConfigError);
}

TEST_CASE("blip and regret conversions") {
  CHECK(blip_to_regret({0, 5}) == std::vector<double>{5, 0});
  CHECK(blip_to_regret({0, -3}) == std::vector<double>{0, 3});
  Rng rng(1);
  for (int h = 0; h < 10; ++h) {
    std::vector<double> blip{0.0, rng.normal(0, 10)};
    auto regret = blip_to_regret(blip);
    for (double r : regret) CHECK(r >= 0);
    auto back = regret_to_blip(regret);
    CHECK(back[0] == 0.0);
    CHECK(back[1] == doctest::Approx(blip[1]).epsilon(1e-14));
  }
}

TEST_CASE("method names") {
  for (const auto& name : method_names()) CHECK(to_string(parse_method(name)) == name);
  try {
    parse_method("sarsa");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("aipwe") != std::string::npos);
  }
}
