#include "dtr/indirect.hpp"

#include <algorithm>
#include <numeric>

#include "dtr/error.hpp"
#include "dtr/stats.hpp"

namespace dtr {
namespace {

DesignMatrix block(const FeatureMap& m, const Dataset& data, const std::vector<std::size_t>& rows) {
  return {design(m, data, rows), m.labels()};
}

DesignMatrix scaled(const DesignMatrix& X, const Eigen::VectorXd& s, const std::string& prefix) {
  DesignMatrix out{s.asDiagonal() * X.values, {}};
  for (const auto& l : X.labels) out.labels.push_back(prefix + l);
  return out;
}

void check_specs(const Dataset& data, const std::vector<StageModelSpec>& specs, bool need_prop) {
  if (static_cast<int>(specs.size()) != data.stages())
    throw ConfigError("expected " + std::to_string(data.stages()) + " stage specs, got " +
                      std::to_string(specs.size()));
  for (int j = 1; j <= data.stages(); ++j) {
    const auto& s = specs[j - 1];
    if (s.contrast.empty()) throw ConfigError("contrast features missing", j);
    if (s.contrast.stage() != j || (!s.tfree.empty() && s.tfree.stage() != j) ||
        (!s.propensity.empty() && s.propensity.stage() != j))
      throw ConfigError("stage spec compiled for the wrong stage", j);
    if (need_prop && s.propensity.empty()) throw ConfigError("propensity features missing", j);
  }
}

FitResult start_fit(const Dataset& data, Method m) {
  FitResult fit;
  fit.method = m;
  fit.stages.resize(static_cast<std::size_t>(data.stages()));
  fit.values.assign(static_cast<std::size_t>(data.stages()), {});
  return fit;
}

void finish_fit(FitResult& fit, std::vector<Rule> rules) {
  fit.regime = Regime(std::move(rules));
  fit.mean_values.clear();
  for (const auto& col : fit.values)
    fit.mean_values.push_back(std::accumulate(col.begin(), col.end(), 0.0) /
                              static_cast<double>(col.size()));
}

FitResult indirect_fit(const Dataset& data, const std::vector<StageModelSpec>& specs, Method m) {
  const bool q = m == Method::q;
  check_specs(data, specs, !q);
  FitResult fit = start_fit(data, m);
  const int K = data.stages();
  std::vector<double> v = data.outcomes();
  std::vector<Rule> rules(static_cast<std::size_t>(K));

  for (int j = K; j >= 1; --j) {
    try {
      const auto& spec = specs[j - 1];
      const auto rows = data.reaching(j);
      const auto n = static_cast<Eigen::Index>(rows.size());
      StageFit& sf = fit.stages[j - 1];
      sf.stage = j;
      sf.rows = static_cast<int>(n);
      sf.contrast = spec.contrast;
      sf.tfree = spec.tfree;

      const DesignMatrix R = block(spec.contrast, data, rows);
      const DesignMatrix D = block(spec.tfree, data, rows);
      std::vector<int> a(rows.size());
      Eigen::VectorXd A(n), y(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        a[r] = data[rows[r]].stages[j - 1].action;
        A[r] = a[r];
        y[r] = v[rows[r]];
      }
      Eigen::VectorXd pi;
      if (!q) {
        auto pf = fit_propensity(data, spec.propensity, rows);
        sf.propensity = pf.model;
        sf.alpha = pf.logistic.coef;
        sf.clipped = pf.clipped;
        pi = pf.fitted;
      }
      const DesignMatrix AR = scaled(R, A, "A*");

      switch (m) {
        case Method::q: {
          auto lf = ols_fit(hcat({&AR, &D}), y);
          sf.psi = lf.coef.head(R.cols());
          sf.xi = lf.coef.tail(D.cols());
          sf.condition = lf.condition;
          break;
        }
        case Method::a1:
        case Method::a3: {
          const DesignMatrix none{Eigen::MatrixXd(n, 0), {}};
          auto ee = solve_joint_linear_ee(R, a, m == Method::a1 ? none : D, pi, y);
          sf.psi = ee.psi;
          sf.xi = ee.xi;
          sf.condition = ee.condition;
          sf.ee_residual = ee.relative_residual;
          break;
        }
        case Method::a2:
        case Method::a4: {
          const DesignMatrix PR = scaled(R, pi, "pi*");
          // A2 carries only an intercept besides the propensity-adjusted block.
          const DesignMatrix one{Eigen::MatrixXd::Ones(n, 1), {"1"}};
          auto lf = m == Method::a2 ? ols_fit(hcat({&AR, &PR, &one}), y)
                                    : ols_fit(hcat({&AR, &PR, &D}), y);
          sf.psi = lf.coef.head(R.cols());
          if (m == Method::a4) sf.xi = lf.coef.tail(D.cols());
          sf.condition = lf.condition;
          break;
        }
        case Method::dwols: {
          const Eigen::VectorXd w = (A - pi).cwiseAbs();
          auto lf = ols_fit(hcat({&AR, &D}), y, w);
          sf.psi = lf.coef.head(R.cols());
          sf.xi = lf.coef.tail(D.cols());
          sf.condition = lf.condition;
          break;
        }
        default:
          throw ConfigError("not an indirect method: " + to_string(m));
      }
      if (m != Method::q && m != Method::a3 && m != Method::a4 && m != Method::dwols)
        sf.xi.resize(0);

      const Eigen::VectorXd C = R.values * sf.psi;
      for (Eigen::Index r = 0; r < n; ++r) {
        const double c = C[r];
        const double gain = c > 0 ? c : 0.0;
        if (q) {
          const double mfree = D.cols() > 0 ? D.values.row(r).dot(sf.xi) : 0.0;
          v[rows[r]] = gain + mfree;
        } else {
          v[rows[r]] += gain - a[r] * c;
        }
      }
      fit.values[j - 1] = v;
      rules[j - 1] = LinearSignRule{spec.contrast, sf.psi};
    } catch (...) {
      rethrow_at_stage(j);
    }
  }
  finish_fit(fit, std::move(rules));
  return fit;
}

}  // namespace

FitResult q_learning_fit(const Dataset& data, const std::vector<StageModelSpec>& specs) {
  return indirect_fit(data, specs, Method::q);
}

FitResult a_learning_fit(const Dataset& data, const std::vector<StageModelSpec>& specs,
                         Method method) {
  switch (method) {
    case Method::a1:
    case Method::a2:
    case Method::a3:
    case Method::a4:
    case Method::dwols:
      return indirect_fit(data, specs, method);
    default:
      throw ConfigError("not an A-learning variant: " + to_string(method));
  }
}

std::vector<double> blip_to_regret(const std::vector<double>& blip) {
  if (blip.empty()) return {};
  const double top = *std::max_element(blip.begin(), blip.end());
  std::vector<double> mu(blip.size());
  for (std::size_t k = 0; k < blip.size(); ++k) mu[k] = top - blip[k];
  return mu;
}

std::vector<double> regret_to_blip(const std::vector<double>& regret) {
  std::vector<double> g(regret.size());
  for (std::size_t k = 0; k < regret.size(); ++k) g[k] = regret[0] - regret[k];
  return g;
}

std::vector<StageModelSpec> case1_specs(const Schema& schema) {
  if (schema.stages() != 2 || schema.dim(1) != 1 || schema.dim(2) != 1)
    throw ConfigError("the two-stage example specs need one covariate per stage");
  const auto& l1 = schema.labels(1)[0];
  const auto& l2 = schema.labels(2)[0];
  return {
      {FeatureMap::parse("1," + l1, schema, 1), FeatureMap::parse("1," + l1, schema, 1),
       FeatureMap::parse("1," + l1, schema, 1)},
      {FeatureMap::parse("1," + l2, schema, 2),
       FeatureMap::parse("1," + l1 + ",A1," + l1 + ":A1," + l2, schema, 2),
       FeatureMap::parse("1," + l2, schema, 2)},
  };
}

}  // namespace dtr
