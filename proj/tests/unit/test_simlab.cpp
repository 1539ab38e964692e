#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtr/error.hpp"
#include "dtr/rng.hpp"
#include "dtr/simlab.hpp"
#include "toy.hpp"

using namespace dtr;

namespace {

Rule constant_rule(const Schema& s, int stage, int action) {
  return ExpressionRule{Expression::compile(action ? "1" : "0", s, stage)};
}

Regime constant_regime(const Schema& s, int action) {
  std::vector<Rule> rules;
  for (int j = 1; j <= s.stages(); ++j) rules.push_back(constant_rule(s, j, action));
  return Regime(rules);
}

// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
double ks_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, k = 0;
  double d = 0;
  while (i < a.size() && k < b.size()) {
    const double x = std::min(a[i], b[k]);
    while (i < a.size() && a[i] == x) ++i;
    while (k < b.size() && b[k] == x) ++k;
    d = std::max(d, std::abs(double(i) / a.size() - double(k) / b.size()));
  }
  const double ne = double(a.size()) * b.size() / (a.size() + b.size());
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0;
  for (int m = 1; m <= 100; ++m)
    p += 2 * (m % 2 ? 1 : -1) * std::exp(-2 * lambda * lambda * m * m);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("case-1 sampler follows the stated law") {
  auto d = generate_case1(100000, 1);
  double sum = 0;
  for (std::size_t i = 0; i < d.size(); ++i) sum += d[i].stages[0].covariates[0];
  CHECK(std::abs(sum / d.size() - 450) <= 1.5);
  CHECK(d.schema() == Schema({{"L1"}, {"L2"}}));

  auto oracle = case1_oracle(d.schema());
  CHECK(implied_threshold(oracle.rule(1)).value() == doctest::Approx(250));
  CHECK(implied_threshold(oracle.rule(2)).value() == doctest::Approx(360));
}

TEST_CASE("case-2 sampler respects truncation and the oracle rules") {
  auto d = generate_case2(20000, 2);
  CHECK(d.schema() == Schema({{"W", "L11", "L12"}, {"L21", "L22"}, {"L31", "L32"}}));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& t = d[i];
    REQUIRE(t.stages[0].covariates[0] > 10);
    for (const auto& s : t.stages)
      for (std::size_t c = (&s == &t.stages[0]) ? 1 : 0; c < s.covariates.size(); ++c)
        REQUIRE(s.covariates[c] > 0);
  }
  auto oracle = case2_oracle(d.schema());
  std::vector<StageObs> obs{{{45, 20, 10}, 0}, {{20, 10}, 0}, {{20, 20}, 0}};
  CHECK(oracle.apply(History(3, obs)) == 1);
  obs[2].covariates = {20, 14};
  CHECK(oracle.apply(History(3, obs)) == 0);
}

TEST_CASE("generators are deterministic in the seed") {
  auto a = generate_case2(200, 9), b = generate_case2(200, 9), c = generate_case2(200, 10);
  CHECK(a.trajectories().size() == b.trajectories().size());
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].outcome == b[i].outcome &&
           a[i].stages[2].covariates == b[i].stages[2].covariates;
    differs = differs || a[i].outcome != c[i].outcome;
  }
  CHECK(same);
  CHECK(differs);
  auto g1 = generate_from_spec(case1_spec(), 100, 4), g2 = generate_from_spec(case1_spec(), 100, 4);
  for (std::size_t i = 0; i < g1.size(); ++i) REQUIRE(g1[i].outcome == g2[i].outcome);
}

TEST_CASE("generic generator matches the direct case-1 sampler in distribution") {
  auto spec = case1_spec();
  auto g = generate_from_spec(spec, 10000, 101);
  auto d = generate_case1(10000, 202);
  CHECK(ks_pvalue(g.outcomes(), d.outcomes()) > 0.01);
  std::vector<double> l2g, l2d;
  for (std::size_t i = 0; i < g.size(); ++i) {
    l2g.push_back(g[i].stages[1].covariates[0]);
    l2d.push_back(d[i].stages[1].covariates[0]);
  }
  CHECK(ks_pvalue(l2g, l2d) > 0.01);
}

TEST_CASE("regret-free spec has mean outcome mu0") {
  auto spec = case1_spec();
  for (auto& st : spec.stages) st.regret = [](const History&, int) { return 0.0; };
  auto d = generate_from_spec(spec, 20000, 5);
  auto y = d.outcomes();
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  // Outcome SD is about sqrt(60^2 + 240^2).
  CHECK(std::abs(mean - 1120) <= 3 * 248 / std::sqrt(20000.0));
}

TEST_CASE("negative regret is rejected by the audit") {
  auto spec = case1_spec();
  spec.stages[1].regret = [](const History&, int a) { return a == 1 ? -1.0 : 0.0; };
  CHECK_THROWS_AS(generate_from_spec(spec, 50, 1), ConfigError);

  auto off = case1_spec();
  off.stages[0].regret = [](const History&, int) { return 1.0; };
  CHECK_THROWS_AS(generate_from_spec(off, 50, 1), ConfigError);
}

TEST_CASE("regret audit passes on ten thousand rows per design") {
  CHECK_NOTHROW(generate_from_spec(case1_spec(), 10000, 12));
  CHECK_NOTHROW(generate_from_spec(case2_spec(), 10000, 13));
}

TEST_CASE("Monte Carlo values of oracle and fixed regimes") {
  auto s1 = case1_spec();
  auto o1 = mc_value(s1.oracle, s1, 10000, 3);
  CHECK(std::abs(o1.value - 1120) <= 8);
  CHECK(o1.draws == 10000);
  CHECK(o1.se > 0);

  auto s2 = case2_spec();
  auto o2 = mc_value(s2.oracle, s2, 10000, 4);
  CHECK(std::abs(o2.value - 100) <= 0.4);

  for (int a : {0, 1}) {
    auto fixed = mc_value(constant_regime(s1.schema(), a), s1, 10000, 3);
    CHECK(fixed.value <= o1.value + 3 * std::hypot(fixed.se, o1.se));
    auto fixed2 = mc_value(constant_regime(s2.schema(), a), s2, 10000, 4);
    CHECK(fixed2.value <= o2.value + 3 * std::hypot(fixed2.se, o2.se));
  }

  auto jobs = mc_value(s1.oracle, s1, 10000, 3, 4);
  CHECK(jobs.value == o1.value);
  CHECK(jobs.se == o1.se);

  CHECK_THROWS_AS(mc_value(s1.oracle, s1, 0, 3), ConfigError);
  CHECK_THROWS_AS(mc_value(s2.oracle, s1, 10, 3), ConfigError);
}

TEST_CASE("decision accuracy") {
  auto test = generate_case1(1000, 8);
  const auto& s = test.schema();
  auto oracle = case1_oracle(s);
  auto same = decision_accuracy(oracle, oracle, test);
  CHECK(same.stage == std::vector<double>{1.0, 1.0});
  CHECK(same.overall == 1.0);
  CHECK(same.test_size == 1000);

  Regime flipped({ThresholdRule{{1, 0}, "L1", 250, Direction::above}, oracle.rule(2)});
  auto inv = decision_accuracy(flipped, oracle, test);
  CHECK(inv.stage[0] == 0.0);
  CHECK(inv.stage[1] == 1.0);
  CHECK(inv.overall == 0.0);

  for (double c1 : {100.0, 240.0, 400.0}) {
    for (double c2 : {300.0, 370.0, 500.0}) {
      Regime r({ThresholdRule{{1, 0}, "L1", c1, Direction::below},
                ThresholdRule{{2, 0}, "L2", c2, Direction::below}});
      auto acc = decision_accuracy(r, oracle, test);
      CHECK(acc.overall <= *std::min_element(acc.stage.begin(), acc.stage.end()));
      for (double a : acc.stage) CHECK((a >= 0 && a <= 1));
    }
  }
  CHECK_THROWS(decision_accuracy(case2_oracle(generate_case2(5, 1).schema()), oracle, test));
}

TEST_CASE("bootstrap standard errors") {
  auto d = generate_case1(100, 2);
  auto constant = bootstrap_se([](const Dataset&) { return std::vector<double>{3.0, -1.0}; }, d,
                               50, 1);
  CHECK(constant.se == std::vector<double>{0.0, 0.0});
  CHECK(constant.replicates == 50);

  Rng rng(17);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 100; ++i) rows.push_back({0.0, 0.0, rng.normal()});
  auto normals = toy::wide({{"x"}}, rows);
  auto mean = [](const Dataset& data) {
    auto y = data.outcomes();
    return std::vector<double>{std::accumulate(y.begin(), y.end(), 0.0) / y.size()};
  };
  auto boot = bootstrap_se(mean, normals, 500, 3);
  CHECK(std::abs(boot.se[0] - 0.1) <= 0.025);
  BootstrapOptions par;
  par.jobs = 3;
  CHECK(bootstrap_se(mean, normals, 500, 3, par).se == boot.se);

  int calls = 0;
  auto flaky = [&](const Dataset& data) {
    if (++calls % 3 == 0) throw NumericalError("replicate failed");
    return mean(data);
  };
  CHECK_THROWS_AS(bootstrap_se(flaky, normals, 30, 3), NumericalError);
  CHECK_THROWS_AS(bootstrap_se(mean, normals, 1, 3), ConfigError);
}

TEST_CASE("bootstrap aligns signs within unit-norm blocks") {
  auto d = generate_case1(60, 6);
  int calls = 0;
  // Alternating sign flips are a pure identification artifact.
  auto flip = [&](const Dataset&) {
    const double s = (calls++ % 2) ? -1.0 : 1.0;
    return std::vector<double>{0.6 * s, 0.8 * s};
  };
  BootstrapOptions opt;
  opt.sign_blocks = {{0, 2}};
  auto r = bootstrap_se(flip, d, 20, 1, opt);
  CHECK(r.se[0] == doctest::Approx(0.0));
  CHECK(r.se[1] == doctest::Approx(0.0));
}
