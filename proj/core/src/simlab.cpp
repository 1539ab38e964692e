#include "dtr/simlab.hpp"

#include <cmath>
#include <numeric>

#include "dtr/error.hpp"
#include "dtr/parallel.hpp"
#include "dtr/rng.hpp"

namespace dtr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Case-1 regret (I{c > 0} - a) * c with c = psi0 + psi1 * x.
double linear_regret(double psi0, double psi1, double x, int a) {
  const double c = psi0 + psi1 * x;
  return ((c > 0 ? 1 : 0) - a) * c;
}

double case2_regret(int stage, const History& h, int a) {
  double scale = 0;
  bool treat = false;
  switch (stage) {
    case 1: {
      const double l11 = h.covariate(1, 1), l12 = h.covariate(1, 2);
      scale = 0.5 * (std::abs(l11 - 30) + std::abs(l12 - 12));
      treat = l11 > 30 || l12 > 12;
      break;
    }
    case 2: {
      const double l21 = h.covariate(2, 0), l22 = h.covariate(2, 1);
      scale = std::abs(l21 - 25) + std::abs(l22 - 10);
      treat = l21 > 25 || l22 > 10;
      break;
    }
    default: {
      scale = 2.0 * std::log(h.covariate(1, 0));
      treat = h.covariate(3, 0) + h.covariate(3, 1) > 35;
      break;
    }
  }
  const double d = (treat ? 1 : 0) - a;
  return scale * d * d;
}

// Draws stage covariates and (unless forced) actions for one trajectory.
// Returns the outcome.
double simulate_row(const DgpSpec& spec, Rng& rng, Trajectory& t, const Regime* forced,
                    bool audit, std::size_t row) {
  const int K = spec.stage_count();
  t.stages.assign(static_cast<std::size_t>(K), {});
  double mean = spec.mu0;
  for (int j = 1; j <= K; ++j) {
    const auto& st = spec.stages[j - 1];
    auto& obs = t.stages[j - 1];
    obs.covariates.reserve(st.covariates.size());
    const std::span<const StageObs> view(t.stages.data(), static_cast<std::size_t>(j));
    for (const auto& c : st.covariates) {
      const History h(j, view);
      const double mu = c.mean(h);
      const double sd = c.sd ? c.sd(h) : 1.0;
      double x;
      if (std::isinf(c.lower) && std::isinf(c.upper)) x = rng.normal(mu, sd);
      else x = rng.truncated_normal(mu, sd, c.lower, c.upper);
      obs.covariates.push_back(x);
    }
    const History h(j, view);
    if (forced) {
      obs.action = forced->apply(h);
    } else {
      const double p = st.propensity(h);
      obs.action = rng.bernoulli(p);
    }
    if (st.mean_zero) mean += st.mean_zero(h);
    const double mu_a = st.regret(h, obs.action);
    if (audit) {
      const double r0 = st.regret(h, 0), r1 = st.regret(h, 1);
      const double tol = 1e-9 * (1.0 + std::abs(r0) + std::abs(r1));
      if (!(r0 >= -tol && r1 >= -tol))
        throw ConfigError("regret function is negative at row " + std::to_string(row + 1), j);
      const int best = spec.oracle.apply(h);
      if (std::abs(best == 1 ? r1 : r0) > tol)
        throw ConfigError("regret is not zero at the oracle action at row " +
                              std::to_string(row + 1),
                          j);
    }
    mean -= mu_a;
  }
  return mean + spec.outcome_sd * rng.normal();
}

}  // namespace

Schema DgpSpec::schema() const {
  std::vector<std::vector<std::string>> labels;
  for (const auto& s : stages) {
    labels.emplace_back();
    for (const auto& c : s.covariates) labels.back().push_back(c.name);
  }
  return Schema(std::move(labels));
}

Regime case1_oracle(const Schema& schema) {
  Eigen::VectorXd p1(2), p2(2);
  p1 << 250, -1;
  p2 << 720, -2;
  return Regime({LinearSignRule{FeatureMap::parse("1,L1", schema, 1), p1},
                 LinearSignRule{FeatureMap::parse("1,L2", schema, 2), p2}});
}

Regime case2_oracle(const Schema& schema) {
  return Regime({ExpressionRule{Expression::compile("L11 > 30 || L12 > 12", schema, 1)},
                 ExpressionRule{Expression::compile("L21 > 25 || L22 > 10", schema, 2)},
                 ExpressionRule{Expression::compile("L31 + L32 > 35", schema, 3)}});
}

DgpSpec case1_spec() {
  DgpSpec s;
  s.name = "case1";
  s.mu0 = 1120;
  s.outcome_sd = 60;
  DgpStage s1, s2;
  s1.covariates.push_back({"L1", [](const History&) { return 450.0; },
                           [](const History&) { return 150.0; }});
  s1.propensity = [](const History& h) { return expit(2 - 0.006 * h.covariate(1, 0)); };
  s1.regret = [](const History& h, int a) { return linear_regret(250, -1, h.covariate(1, 0), a); };
  s1.mean_zero = [](const History& h) { return 1.6 * (h.covariate(1, 0) - 450); };
  s2.covariates.push_back({"L2", [](const History& h) { return 1.25 * h.covariate(1, 0); },
                           [](const History&) { return 60.0; }});
  s2.propensity = [](const History& h) { return expit(0.8 - 0.004 * h.covariate(2, 0)); };
  s2.regret = [](const History& h, int a) { return linear_regret(720, -2, h.covariate(2, 0), a); };
  s.stages = {s1, s2};
  s.oracle = case1_oracle(s.schema());
  return s;
}

DgpSpec case2_spec() {
  DgpSpec s;
  s.name = "case2";
  s.mu0 = 100;
  s.outcome_sd = 10;
  auto constant = [](double v) { return [v](const History&) { return v; }; };
  DgpStage s1, s2, s3;
  s1.covariates = {{"W", constant(45), constant(10), 10, kInf},
                   {"L11", constant(20), constant(5), 0, kInf},
                   {"L12", constant(10), constant(3), 0, kInf}};
  s1.propensity = [](const History& h) { return expit(-3 + 0.1 * h.covariate(1, 0)); };
  s1.regret = [](const History& h, int a) { return case2_regret(1, h, a); };
  s2.covariates = {
      {"L21", [](const History& h) { return 1.25 * h.covariate(1, 1) - 2 * h.action(1); },
       constant(5), 0, kInf},
      {"L22", [](const History& h) { return h.covariate(1, 2) - h.action(1); }, constant(3), 0,
       kInf}};
  s2.propensity = [](const History& h) {
    return expit(-1 + 0.04 * (h.covariate(2, 0) + h.covariate(2, 1)));
  };
  s2.regret = [](const History& h, int a) { return case2_regret(2, h, a); };
  s3.covariates = {
      {"L31",
       [](const History& h) { return h.covariate(2, 0) - 2 * (h.action(1) + h.action(2)); },
       constant(5), 0, kInf},
      {"L32", [](const History& h) { return h.covariate(2, 1) - h.action(2); }, constant(3), 0,
       kInf}};
  s3.propensity = [](const History& h) { return expit(-2 + 0.1 * h.covariate(3, 0)); };
  s3.regret = [](const History& h, int a) { return case2_regret(3, h, a); };
  s.stages = {s1, s2, s3};
  s.oracle = case2_oracle(s.schema());
  return s;
}

Dataset generate_case1(std::size_t n, std::uint64_t seed) {
  std::vector<Trajectory> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    const double l1 = rng.normal(450, 150);
    const int a1 = rng.bernoulli(expit(2 - 0.006 * l1));
    const double l2 = rng.normal(1.25 * l1, 60);
    const int a2 = rng.bernoulli(expit(0.8 - 0.004 * l2));
    const double y = rng.normal(400 + 1.6 * l1, 60) - linear_regret(250, -1, l1, a1) -
                     linear_regret(720, -2, l2, a2);
    rows[i].stages = {{{l1}, a1}, {{l2}, a2}};
    rows[i].outcome = y;
  }
  return Dataset(Schema({{"L1"}, {"L2"}}), std::move(rows));
}

Dataset generate_case2(std::size_t n, std::uint64_t seed) {
  std::vector<Trajectory> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    auto tn = [&](double m, double sd, double lo) { return rng.truncated_normal(m, sd, lo, kInf); };
    const double w = tn(45, 10, 10);
    const double l11 = tn(20, 5, 0);
    const double l12 = tn(10, 3, 0);
    const int a1 = rng.bernoulli(expit(-3 + 0.1 * w));
    const double l21 = tn(1.25 * l11 - 2 * a1, 5, 0);
    const double l22 = tn(l12 - a1, 3, 0);
    const int a2 = rng.bernoulli(expit(-1 + 0.04 * (l21 + l22)));
    const double l31 = tn(l21 - 2 * (a1 + a2), 5, 0);
    const double l32 = tn(l22 - a2, 3, 0);
    const int a3 = rng.bernoulli(expit(-2 + 0.1 * l31));

    const double s1 = 0.5 * (std::abs(l11 - 30) + std::abs(l12 - 12));
    const double d1 = ((l11 > 30 || l12 > 12) ? 1 : 0) - a1;
    const double s2 = std::abs(l21 - 25) + std::abs(l22 - 10);
    const double d2 = ((l21 > 25 || l22 > 10) ? 1 : 0) - a2;
    const double s3 = 2 * std::log(w);
    const double d3 = (l31 + l32 > 35 ? 1 : 0) - a3;
    const double y = rng.normal(100, 10) - s1 * d1 * d1 - s2 * d2 * d2 - s3 * d3 * d3;
    rows[i].stages = {{{w, l11, l12}, a1}, {{l21, l22}, a2}, {{l31, l32}, a3}};
    rows[i].outcome = y;
  }
  return Dataset(Schema({{"W", "L11", "L12"}, {"L21", "L22"}, {"L31", "L32"}}), std::move(rows));
}

Dataset generate_from_spec(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.stages.empty()) throw ConfigError("DGP has no stages");
  if (spec.oracle.stages() != spec.stage_count())
    throw ConfigError("DGP oracle regime has the wrong number of stages");
  for (std::size_t j = 0; j < spec.stages.size(); ++j) {
    const auto& s = spec.stages[j];
    if (!s.propensity || !s.regret)
      throw ConfigError("DGP stage lacks a propensity or regret function", static_cast<int>(j) + 1);
    for (const auto& c : s.covariates)
      if (!c.mean) throw ConfigError("covariate '" + c.name + "' has no mean function");
  }
  const Schema schema = spec.schema();
  std::vector<Trajectory> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    rows[i].outcome = simulate_row(spec, rng, rows[i], nullptr, true, i);
  }
  return Dataset(schema, std::move(rows));
}

McValueReport mc_value(const Regime& regime, const DgpSpec& spec, long draws, std::uint64_t seed,
                       int jobs, const std::string& regime_id) {
  if (draws < 1) throw ConfigError("Monte Carlo needs at least one draw");
  if (regime.stages() != spec.stage_count())
    throw ConfigError("regime has " + std::to_string(regime.stages()) + " stages, the DGP has " +
                      std::to_string(spec.stage_count()));
  const auto B = static_cast<std::size_t>(draws);
  std::vector<double> y(B);
  // Chunks keep per-task overhead small; results land by index.
  constexpr std::size_t chunk = 1024;
  const std::size_t chunks = (B + chunk - 1) / chunk;
  parallel_for(chunks, jobs, [&](std::size_t c) {
    Trajectory t;
    for (std::size_t b = c * chunk; b < std::min(B, (c + 1) * chunk); ++b) {
      Rng rng(derive_seed(seed, b));
      y[b] = simulate_row(spec, rng, t, &regime, false, b);
    }
  });
  McValueReport r;
  r.draws = draws;
  r.regime_id = regime_id;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(B);
  double ss = 0;
  for (double v : y) ss += (v - mean) * (v - mean);
  r.value = mean;
  r.se = B > 1 ? std::sqrt(ss / static_cast<double>(B - 1)) / std::sqrt(static_cast<double>(B)) : 0.0;
  return r;
}

AccuracyReport decision_accuracy(const Regime& fitted, const Regime& oracle, const Dataset& test) {
  const int K = test.stages();
  if (fitted.stages() != K || oracle.stages() != K)
    throw ConfigError("regimes and test data have different stage counts");
  std::vector<double> hits(static_cast<std::size_t>(K), 0.0), seen(static_cast<std::size_t>(K), 0.0);
  double all = 0;
  for (const auto& t : test.trajectories()) {
    bool every = true;
    for (int j = 1; j <= t.terminal_stage(); ++j) {
      const History h = history(t, j);
      const bool same = fitted.apply(h) == oracle.apply(h);
      hits[j - 1] += same;
      seen[j - 1] += 1;
      every = every && same;
    }
    all += every;
  }
  AccuracyReport r;
  r.test_size = test.size();
  for (int j = 0; j < K; ++j) r.stage.push_back(seen[j] > 0 ? hits[j] / seen[j] : 0.0);
  r.overall = all / static_cast<double>(test.size());
  return r;
}

BootstrapResult bootstrap_se(const Estimator& estimator, const Dataset& data, int replicates,
                             std::uint64_t seed, const BootstrapOptions& options) {
  if (replicates < 2) throw ConfigError("bootstrap needs at least 2 replicates");
  BootstrapResult out;
  out.point = estimator(data);
  const std::size_t p = out.point.size();
  for (const auto& [b, e] : options.sign_blocks)
    if (b > e || e > p) throw ConfigError("sign-alignment block outside the parameter vector");

  const std::size_t n = data.size();
  std::vector<std::vector<double>> est(static_cast<std::size_t>(replicates));
  std::vector<char> failed(static_cast<std::size_t>(replicates), 0);
  parallel_for(static_cast<std::size_t>(replicates), options.jobs, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    std::vector<std::size_t> rows(n);
    for (auto& i : rows) i = static_cast<std::size_t>(rng.index(n));
    try {
      auto v = estimator(data.subset(rows));
      if (v.size() != p) throw ShapeError("estimator returned a different number of parameters");
      for (const auto& [b, e] : options.sign_blocks) {
        double dot = 0;
        for (std::size_t k = b; k < e; ++k) dot += v[k] * out.point[k];
        if (dot < 0)
          for (std::size_t k = b; k < e; ++k) v[k] = -v[k];
      }
      est[r] = std::move(v);
    } catch (const Error&) {
      failed[r] = 1;
    }
  });
  for (char f : failed) out.failures += f;
  out.replicates = replicates - out.failures;
  if (out.failures * 5 > replicates)
    throw NumericalError("bootstrap: " + std::to_string(out.failures) + " of " +
                         std::to_string(replicates) + " replicates failed");
  if (out.replicates < 2) throw NumericalError("bootstrap: fewer than 2 successful replicates");
  out.se.assign(p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    double m = 0;
    for (std::size_t r = 0; r < est.size(); ++r)
      if (!failed[r]) m += est[r][k];
    m /= out.replicates;
    double ss = 0;
    for (std::size_t r = 0; r < est.size(); ++r)
      if (!failed[r]) ss += (est[r][k] - m) * (est[r][k] - m);
    out.se[k] = std::sqrt(ss / (out.replicates - 1));
  }
  return out;
}

}  // namespace dtr
