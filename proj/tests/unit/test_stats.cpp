#include <doctest.h>

#include <cmath>

#include "dtr/error.hpp"
#include "dtr/rng.hpp"
#include "dtr/stats.hpp"

using namespace dtr;

namespace {

DesignMatrix dm(Eigen::MatrixXd values) {
  DesignMatrix X;
  X.values = std::move(values);
  for (Eigen::Index c = 0; c < X.cols(); ++c) X.labels.push_back("x" + std::to_string(c));
  return X;
}

DesignMatrix random_design(Rng& rng, int n, int p) {
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int c = 1; c < p; ++c) X(i, c) = rng.normal(0, 1 + c);
  }
  return dm(X);
}

double loglik(const Eigen::MatrixXd& X, const std::vector<int>& a, const Eigen::VectorXd& b) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double eta = X.row(i).dot(b);
    ll += a[i] * eta - std::log1p(std::exp(eta));
  }
  return ll;
}

}  // namespace

TEST_CASE("ols on small exact systems") {
  Eigen::MatrixXd X(2, 2);
  X << 1, 0, 1, 1;
  Eigen::VectorXd y(2);
  y << 2, 4;
  auto fit = ols_fit(dm(X), y);
  CHECK(fit.coef[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fit.coef[1] == doctest::Approx(2.0).epsilon(1e-14));

  Eigen::MatrixXd dup(4, 3);
  dup << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;
  Eigen::VectorXd y4(4);
  y4 << 1, 2, 3, 5;
  try {
    ols_fit(dm(dup), y4);
    FAIL("expected a singular design");
  } catch (const SingularError& e) {
    CHECK_FALSE(e.columns().empty());
  }
}

TEST_CASE("ols matches the normal equations and leaves orthogonal residuals") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto X = random_design(rng, 5 + 7 * trial, 3);
    Eigen::VectorXd y(X.rows()), w(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      y[i] = rng.normal(100, 30);
      w[i] = rng.uniform() * 3;
    }
    const Eigen::MatrixXd& V = X.values;

    auto plain = ols_fit(X, y);
    Eigen::VectorXd oracle = (V.transpose() * V).ldlt().solve(V.transpose() * y);
    CHECK((plain.coef - oracle).norm() <= 1e-8 * (1 + oracle.norm()));
    CHECK((V.transpose() * plain.residuals).lpNorm<Eigen::Infinity>() <=
          1e-8 * (1 + y.lpNorm<Eigen::Infinity>()));

    auto ones = ols_fit(X, y, Eigen::VectorXd::Ones(X.rows()));
    CHECK((ones.coef - plain.coef).lpNorm<Eigen::Infinity>() <= 1e-12 * (1 + plain.coef.norm()));

    auto weighted = ols_fit(X, y, w);
    Eigen::VectorXd woracle =
        (V.transpose() * w.asDiagonal() * V).ldlt().solve(V.transpose() * w.asDiagonal() * y);
    CHECK((weighted.coef - woracle).norm() <= 1e-8 * (1 + woracle.norm()));
    CHECK((V.transpose() * w.asDiagonal() * weighted.residuals).lpNorm<Eigen::Infinity>() <=
          1e-8 * (1 + y.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("logistic regression") {
  SUBCASE("intercept only gives the logit of the mean") {
    std::vector<int> a{1, 0, 0, 1, 1, 0, 1, 1};
    auto fit = logistic_fit(dm(Eigen::MatrixXd::Ones(8, 1)), a);
    CHECK(fit.converged);
    CHECK(fit.coef[0] == doctest::Approx(std::log(5.0 / 3.0)).epsilon(1e-8));
  }
  SUBCASE("one class needs the override and stops at the iteration cap") {
    std::vector<int> a(6, 0);
    auto X = dm(Eigen::MatrixXd::Ones(6, 1));
    CHECK_THROWS_AS(logistic_fit(X, a), ConvergenceError);
    LogisticOptions opt;
    opt.allow_degenerate = true;
    auto fit = logistic_fit(X, a, opt);
    CHECK_FALSE(fit.converged);
    CHECK(std::isfinite(fit.coef[0]));
    CHECK(fit.coef[0] < -5.0);
  }
  SUBCASE("separated data raise a convergence error") {
    Eigen::MatrixXd X(6, 2);
    X << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
    CHECK_THROWS_AS(logistic_fit(dm(X), {0, 0, 0, 1, 1, 1}), ConvergenceError);
  }
  SUBCASE("score is zero and agrees with a finite-difference gradient") {
    Rng rng(17);
    const int n = 100;
    Eigen::MatrixXd X(n, 2);
    std::vector<int> a(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = 1;
      X(i, 1) = rng.normal(30, 10);
      a[i] = rng.bernoulli(1.0 / (1.0 + std::exp(3.0 - 0.1 * X(i, 1))));
    }
    auto fit = logistic_fit(dm(X), a);
    CHECK(fit.converged);
    Eigen::VectorXd score = logistic_score(X, a, fit.coef);
    CHECK(score.lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(fit.log_likelihood == doctest::Approx(loglik(X, a, fit.coef)).epsilon(1e-12));

    // Away from the optimum the analytic score must match central differences.
    Eigen::VectorXd b(2);
    b << -2.0, 0.05;
    Eigen::VectorXd s = logistic_score(X, a, b);
    for (int k = 0; k < 2; ++k) {
      const double h = 1e-6 * (1 + std::abs(b[k]));
      Eigen::VectorXd up = b, dn = b;
      up[k] += h;
      dn[k] -= h;
      const double fd = (loglik(X, a, up) - loglik(X, a, dn)) / (2 * h);
      CHECK(std::abs(fd - s[k]) <= 1e-5 * (1 + std::abs(fd)));
    }
    // At the optimum the finite-difference gradient vanishes as well.
    for (int k = 0; k < 2; ++k) {
      const double h = 1e-6 * (1 + std::abs(fit.coef[k]));
      Eigen::VectorXd up = fit.coef, dn = fit.coef;
      up[k] += h;
      dn[k] -= h;
      CHECK(std::abs((loglik(X, a, up) - loglik(X, a, dn)) / (2 * h)) <= 1e-5 * n);
    }
  }
}

TEST_CASE("joint estimating equations") {
  SUBCASE("null treatment-free block on four rows") {
    // Hand solution of the 2x2 system: psi = (25/6, -1/6).
    Eigen::MatrixXd R(4, 2);
    R << 1, 1, 1, 2, 1, 3, 1, 4;
    Eigen::VectorXd pi(4), v(4);
    pi << 0.5, 0.5, 0.25, 0.75;
    v << 3, 1, 7, 2;
    auto sol = solve_joint_linear_ee(dm(R), {1, 0, 1, 0}, dm(Eigen::MatrixXd(4, 0)), pi, v);
    CHECK(sol.psi[0] == doctest::Approx(25.0 / 6.0).epsilon(1e-10));
    CHECK(sol.psi[1] == doctest::Approx(-1.0 / 6.0).epsilon(1e-10));
    CHECK(sol.xi.size() == 0);
    CHECK(sol.relative_residual <= 1e-8);
  }
  SUBCASE("full stacked system on six rows") {
    // Exact rational solution of the 4x4 stacked system.
    Eigen::MatrixXd R(6, 2), D(6, 2);
    R << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5, 1, 6;
    D << 1, 2, 1, 0, 1, 1, 1, 3, 1, 1, 1, 2;
    Eigen::VectorXd pi(6), v(6);
    pi << 0.5, 0.25, 2.0 / 3.0, 0.5, 0.75, 1.0 / 3.0;
    v << 5, 3, 8, 2, 9, 4;
    auto sol = solve_joint_linear_ee(dm(R), {1, 0, 1, 0, 1, 0}, dm(D), pi, v);
    CHECK(std::abs(sol.psi[0] - 8303.0 / 3666.0) <= 1e-10);
    CHECK(std::abs(sol.psi[1] - 2183.0 / 3666.0) <= 1e-10);
    CHECK(std::abs(sol.xi[0] - 6899.0 / 1833.0) <= 1e-10);
    CHECK(std::abs(sol.xi[1] + 761.0 / 1833.0) <= 1e-10);
    CHECK(sol.relative_residual <= 1e-8);
  }
  SUBCASE("propensity equal to the action makes the system singular") {
    Eigen::MatrixXd R(4, 2);
    R << 1, 1, 1, 2, 1, 3, 1, 4;
    Eigen::VectorXd pi(4), v(4);
    pi << 1, 0, 1, 0;
    v << 3, 1, 7, 2;
    CHECK_THROWS_AS(solve_joint_linear_ee(dm(R), {1, 0, 1, 0}, dm(Eigen::MatrixXd(4, 0)), pi, v),
                    SingularError);
  }
  SUBCASE("random systems satisfy both equation blocks") {
    Rng rng(8);
    const int n = 200;
    auto R = random_design(rng, n, 2);
    auto D = random_design(rng, n, 3);
    std::vector<int> a(n);
    Eigen::VectorXd pi(n), v(n);
    for (int i = 0; i < n; ++i) {
      pi[i] = 0.2 + 0.6 * rng.uniform();
      a[i] = rng.bernoulli(pi[i]);
      v[i] = rng.normal(500, 100);
    }
    auto sol = solve_joint_linear_ee(R, a, D, pi, v);
    Eigen::VectorXd A(n);
    for (int i = 0; i < n; ++i) A[i] = a[i];
    Eigen::VectorXd resid =
        v - A.cwiseProduct(R.values * sol.psi) - D.values * sol.xi;
    Eigen::VectorXd e1 = R.values.transpose() * (A - pi).cwiseProduct(resid);
    Eigen::VectorXd e2 = D.values.transpose() * resid;
    const double scale = (R.values.transpose() * (A - pi).cwiseProduct(v)).norm() +
                         (D.values.transpose() * v).norm();
    CHECK(e1.norm() <= 1e-8 * scale);
    CHECK(e2.norm() <= 1e-8 * scale);
  }
}

TEST_CASE("maximize") {
  SUBCASE("smooth unimodal objective") {
    OptimizerConfig cfg;
    cfg.method = OptimizerMethod::nelder_mead;
    cfg.starts = {{0.0}};
    cfg.initial_step = {1.0};
    cfg.simplex_tolerance = 1e-10;
    auto r = maximize([](const std::vector<double>& x) { return -(x[0] - 3) * (x[0] - 3); }, cfg);
    CHECK(std::abs(r.argmax[0] - 3.0) <= 1e-4);
  }
  SUBCASE("step objective on a grid") {
    OptimizerConfig cfg;
    cfg.method = OptimizerMethod::grid;
    cfg.grid = {{0.0, 0.5, 1.5, 2.0}};
    auto r = maximize([](const std::vector<double>& x) { return x[0] > 1 ? 1.0 : 0.0; }, cfg);
    CHECK(r.value == 1.0);
    CHECK((r.argmax[0] == 1.5 || r.argmax[0] == 2.0));
    CHECK(r.evaluations == 4);
  }
  SUBCASE("non-finite values report the offending point") {
    OptimizerConfig cfg;
    cfg.method = OptimizerMethod::grid;
    cfg.grid = {{0.0, 1.0, 2.0}};
    try {
      maximize([](const std::vector<double>& x) { return x[0] == 1.0 ? std::nan("") : 0.0; }, cfg);
      FAIL("expected an evaluation error");
    } catch (const EvaluationError& e) {
      REQUIRE(e.point().size() == 1);
      CHECK(e.point()[0] == 1.0);
    }
  }
  SUBCASE("the polish never loses the best grid value") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const double a = rng.normal(0, 2), b = rng.normal(0, 2);
      auto f = [&](const std::vector<double>& x) {
        return std::floor(3 * std::sin(a * x[0]) + 3 * std::cos(b * x[1]));
      };
      OptimizerConfig grid;
      grid.method = OptimizerMethod::grid;
      grid.grid = {{-2, -1, 0, 1, 2}, {-2, -1, 0, 1, 2}};
      auto g = maximize(f, grid);
      OptimizerConfig polish = grid;
      polish.method = OptimizerMethod::grid_then_nelder_mead;
      polish.lower = {-2, -2};
      polish.upper = {2, 2};
      auto p = maximize(f, polish);
      CHECK(p.value >= g.value);
      CHECK(f(p.argmax) == p.value);
    }
  }
  SUBCASE("multi-start is seeded") {
    OptimizerConfig cfg;
    cfg.method = OptimizerMethod::multi_start;
    cfg.random_starts = 5;
    cfg.lower = {-5, -5};
    cfg.upper = {5, 5};
    cfg.seed = 99;
    auto f = [](const std::vector<double>& x) {
      return -std::pow(x[0] - 1, 2) - std::pow(x[1] + 2, 2) + std::cos(3 * x[0]);
    };
    auto r1 = maximize(f, cfg);
    auto r2 = maximize(f, cfg);
    CHECK(r1.argmax == r2.argmax);
    CHECK(r1.value == r2.value);
  }
}
