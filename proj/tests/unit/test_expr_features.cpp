#include <doctest.h>

#include <cmath>

#include "dtr/error.hpp"
#include "dtr/expr.hpp"
#include "dtr/features.hpp"
#include "toy.hpp"

using namespace dtr;

namespace {

Dataset sample() {
  return toy::wide({{"W", "L11"}, {"L21"}}, {{40, 31, 1, 24, 0, 90}, {50, 10, 0, 26, 1, 80}});
}

}  // namespace

TEST_CASE("expressions evaluate arithmetic and logic over the history") {
  auto d = sample();
  const auto& s = d.schema();
  auto h = history(d[0], 2);

  CHECK(Expression::compile("L11 > 30 || L21 > 25", s, 2)(h) == 1.0);
  CHECK(Expression::compile("L11 > 30 && L21 > 25", s, 2)(h) == 0.0);
  CHECK(Expression::compile("L11 > 30 or L21 > 25", s, 2)(h) == 1.0);
  CHECK(Expression::compile("!(L11 > 30)", s, 2)(h) == 0.0);
  CHECK(Expression::compile("2 * log(W) + abs(L21 - 25)", s, 2)(h) ==
        doctest::Approx(2 * std::log(40.0) + 1.0));
  CHECK(Expression::compile("expit(-3 + 0.1 * W)", s, 1)(history(d[0], 1)) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(Expression::compile("2 ^ 3 - 1", s, 1)(h) == 7.0);
  CHECK(Expression::compile("-2 ^ 2", s, 1)(h) == -4.0);
  CHECK(Expression::compile("min(L11, W) + max(1, 2) + pow(2, 2)", s, 1)(h) == 37.0);
  CHECK(Expression::compile("I(A1 == 1) * 5", s, 2)(h) == 5.0);

  auto with_a = Expression::compile("(I(L11 > 30) - A)^2", s, 1, true);
  CHECK(with_a(history(d[0], 1), 0) == 1.0);
  CHECK(with_a(history(d[0], 1), 1) == 0.0);
}

TEST_CASE("expressions reject names outside the visible history") {
  auto d = sample();
  const auto& s = d.schema();
  CHECK_THROWS_AS(Expression::compile("L21 > 0", s, 1), ConfigError);
  CHECK_THROWS_AS(Expression::compile("A1 + 1", s, 1), ConfigError);
  CHECK_THROWS_AS(Expression::compile("A + 1", s, 1), ConfigError);
  CHECK_THROWS_AS(Expression::compile("nope + 1", s, 1), ConfigError);
  CHECK_THROWS_AS(Expression::compile("(1 + 2", s, 1), ConfigError);
  CHECK_THROWS_AS(Expression::compile("1 +", s, 1), ConfigError);
}

TEST_CASE("feature maps expand formulas") {
  auto d = sample();
  const auto& s = d.schema();
  auto h = history(d[0], 2);

  auto m = FeatureMap::parse("1,L11,A1,L11:A1,L21", s, 2);
  CHECK(m.labels() == std::vector<std::string>{"1", "L11", "A1", "L11:A1", "L21"});
  Eigen::VectorXd expected(5);
  expected << 1, 31, 1, 31, 24;
  CHECK(m(h) == expected);

  auto implicit = FeatureMap::parse("L21", s, 2);
  CHECK(implicit.labels() == std::vector<std::string>{"1", "L21"});
  CHECK(implicit.intercept_slope().has_value());
  CHECK(implicit.intercept_slope()->stage == 2);

  auto no_intercept = FeatureMap::parse("0,L21", s, 2);
  CHECK(no_intercept.labels() == std::vector<std::string>{"L21"});
  CHECK(FeatureMap::parse("L21", s, 2, false).size() == 1);
  CHECK(FeatureMap::parse("none", s, 2).empty());

  auto expr = FeatureMap::parse("{abs(L21 - 25)}", s, 2);
  CHECK(expr(h)[1] == 1.0);

  CHECK_THROWS_AS(FeatureMap::parse("1,L21", s, 1), ConfigError);
  CHECK_THROWS_AS(FeatureMap::parse("1,A2", s, 2), ConfigError);
  CHECK_THROWS_AS(FeatureMap::parse("1,L11,L11", s, 2), ConfigError);
  CHECK_THROWS_AS(FeatureMap::parse("1,,L11", s, 2), ConfigError);
  CHECK_THROWS_AS(m(history(d[0], 1)), ShapeError);

  std::vector<std::size_t> rows{1, 0};
  Eigen::MatrixXd X = design(m, d, rows);
  CHECK(X.rows() == 2);
  CHECK(X(0, 1) == 10.0);
  CHECK(X(1, 1) == 31.0);
}
