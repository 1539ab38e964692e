#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtr/direct.hpp"
#include "dtr/error.hpp"
#include "dtr/rng.hpp"

namespace dtr {
namespace {

double median_distance(const Eigen::MatrixXd& Z) {
  // At most 400 rows keeps the heuristic cheap; the subsample is the prefix
  // of an already shuffled-by-design row order.
  const Eigen::Index m = std::min<Eigen::Index>(Z.rows(), 400);
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b) d.push_back((Z.row(a) - Z.row(b)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0 ? *mid : 1.0;
}

struct StageProblem {
  Eigen::MatrixXd Z;  // standardized features
  std::vector<int> y;  // +1 / -1
  Eigen::VectorXd w;   // normalized weights
};

DecisionFunction train(const StageProblem& p, const std::vector<std::size_t>& rows, Kernel kernel,
                       double gamma, double kappa, double gap_tol, const Eigen::VectorXd& center,
                       const Eigen::VectorXd& scale, SvmSolution* sol_out) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd Z(m, p.Z.cols());
  std::vector<int> y(rows.size());
  Eigen::VectorXd box(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    Z.row(r) = p.Z.row(static_cast<Eigen::Index>(rows[r]));
    y[r] = p.y[rows[r]];
    box[r] = kappa * p.w[static_cast<Eigen::Index>(rows[r])];
  }
  const bool pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool neg = std::find(y.begin(), y.end(), -1) != y.end();
  if (!pos || !neg) return DecisionFunction::constant(static_cast<int>(Z.cols()), pos ? 1.0 : -1.0);
  const Eigen::MatrixXd K = kernel_matrix(kernel, gamma, Z, Z);
  SvmSolution sol = solve_weighted_svm(K, y, box, gap_tol);
  int nsv = 0;
  for (Eigen::Index r = 0; r < m; ++r) nsv += sol.alpha[r] > 0;
  Eigen::MatrixXd S(nsv, Z.cols());
  Eigen::VectorXd coef(nsv);
  int at = 0;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (sol.alpha[r] <= 0) continue;
    S.row(at) = Z.row(r);
    coef[at] = sol.alpha[r] * y[r];
    ++at;
  }
  if (sol_out) *sol_out = sol;
  // Support points are stored standardized; center/scale are applied on input.
  return DecisionFunction(kernel, gamma, center, scale, std::move(S), std::move(coef),
                          sol.intercept);
}

}  // namespace

FitResult bowl_fit(const Dataset& data, const OwlSpec& spec,
                   const std::vector<PropensityModel>& propensities) {
  const int K = data.stages();
  if (static_cast<int>(spec.features.size()) != K)
    throw ConfigError("expected " + std::to_string(K) + " decision-function formulas");
  if (static_cast<int>(propensities.size()) != K)
    throw ConfigError("expected " + std::to_string(K) + " propensity models");
  if (spec.c_grid.empty()) throw ConfigError("tuning grid is empty");
  if (spec.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");

  FitResult fit;
  fit.method = Method::bowl;
  fit.stages.resize(static_cast<std::size_t>(K));
  std::vector<Rule> rules(static_cast<std::size_t>(K));

  // Product of P(A_k | H_k) over stages k >= j actually observed, and
  // whether the trajectory follows the fitted rules after stage j.
  const std::size_t n = data.size();
  std::vector<double> prob_tail(n, 1.0);
  std::vector<char> follows(n, 1);

  for (int j = K; j >= 1; --j) {
    try {
      const auto& fm = spec.features[j - 1];
      if (fm.empty()) throw ConfigError("decision-function features missing", j);
      StageFit& sf = fit.stages[j - 1];
      sf.stage = j;
      sf.propensity = propensities[j - 1];
      sf.alpha = propensities[j - 1].coef();

      std::vector<std::size_t> rows;
      for (auto r : data.reaching(j)) {
        bool c = false;
        const double p = propensities[j - 1].predict(history(data[r], j), &c);
        sf.clipped += c;
        prob_tail[r] *= data[r].stages[j - 1].action == 1 ? p : 1.0 - p;
        if (follows[r]) rows.push_back(r);
      }
      if (rows.empty())
        throw DataError("no trajectory follows the later-stage rules; a larger sample is needed",
                        j);
      sf.rows = static_cast<int>(rows.size());

      const auto m = static_cast<Eigen::Index>(rows.size());
      const Eigen::MatrixXd X = design(fm, data, rows);
      Eigen::VectorXd center = X.colwise().mean().transpose();
      Eigen::VectorXd scale(X.cols());
      for (Eigen::Index k = 0; k < X.cols(); ++k) {
        const double sd = std::sqrt((X.col(k).array() - center[k]).square().mean());
        scale[k] = sd > 0 ? sd : 1.0;
      }
      StageProblem prob;
      prob.Z = (X.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
      prob.y.resize(rows.size());
      prob.w.resize(m);
      double ymin = INFINITY;
      for (auto r : rows) ymin = std::min(ymin, data[r].outcome);
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto& t = data[rows[r]];
        prob.y[r] = 2 * t.stages[j - 1].action - 1;
        prob.w[r] = (t.outcome - ymin) / prob_tail[rows[r]];
      }
      const double wmean = prob.w.mean();
      if (wmean > 0) prob.w /= wmean;
      else prob.w.setOnes();

      const bool pos = std::find(prob.y.begin(), prob.y.end(), 1) != prob.y.end();
      const bool neg = std::find(prob.y.begin(), prob.y.end(), -1) != prob.y.end();
      std::shared_ptr<const DecisionFunction> fn;
      if (!pos || !neg) {
        fit.warnings.push_back("stage " + std::to_string(j) +
                               ": every consistent trajectory received the same action; using a "
                               "constant rule");
        fn = std::make_shared<const DecisionFunction>(
            DecisionFunction::constant(fm.size(), pos ? 1.0 : -1.0));
      } else {
        double gamma = spec.gamma;
        if (spec.kernel == Kernel::rbf && gamma <= 0) {
          const double s = median_distance(prob.Z);
          gamma = 1.0 / (2.0 * s * s);
        }
        // Cross-validated weighted agreement for each tuning value.
        std::vector<std::size_t> order(rows.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(j)));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        std::vector<int> fold(rows.size());
        for (std::size_t k = 0; k < order.size(); ++k)
          fold[order[k]] = static_cast<int>(k % static_cast<std::size_t>(spec.folds));

        double best_score = -INFINITY;
        double best_kappa = spec.c_grid.front();
        for (double kappa : spec.c_grid) {
          if (!(kappa > 0)) throw ConfigError("tuning values must be positive", j);
          double score = 0.0;
          for (int f = 0; f < spec.folds; ++f) {
            std::vector<std::size_t> tr, te;
            for (std::size_t k = 0; k < rows.size(); ++k) (fold[k] == f ? te : tr).push_back(k);
            if (te.empty() || tr.empty()) continue;
            auto df = train(prob, tr, spec.kernel, gamma, kappa, spec.gap_tolerance,
                            Eigen::VectorXd::Zero(X.cols()), Eigen::VectorXd::Ones(X.cols()),
                            nullptr);
            for (auto k : te) {
              const auto kk = static_cast<Eigen::Index>(k);
              const Eigen::VectorXd z = prob.Z.row(kk).transpose();
              const int a = df(z.data()) > 0 ? 1 : -1;
              if (a == prob.y[k]) score += prob.w[kk];
            }
          }
          if (score > best_score) {
            best_score = score;
            best_kappa = kappa;
          }
        }
        std::vector<std::size_t> all(rows.size());
        std::iota(all.begin(), all.end(), 0);
        SvmSolution sol;
        auto df = train(prob, all, spec.kernel, gamma, best_kappa, spec.gap_tolerance, center,
                        scale, &sol);
        // Objective on the hinge-loss scale: mean weighted hinge + c |psi|^2
        // with c = 1 / (2 kappa n).
        sf.tuning = best_kappa;
        sf.objective = sol.primal / (best_kappa * static_cast<double>(m));
        sf.zero_objective = prob.w.mean();
        if (sf.objective > sf.zero_objective * (1.0 + 1e-9)) {
          fit.warnings.push_back("stage " + std::to_string(j) +
                                 ": solver did not improve on the zero function; using it");
          df = DecisionFunction::constant(fm.size(), 0.0);
          sf.objective = sf.zero_objective;
        }
        if (!sol.converged)
          fit.warnings.push_back("stage " + std::to_string(j) + ": SVM solver hit its iteration cap");
        fn = std::make_shared<const DecisionFunction>(std::move(df));
      }
      sf.decision = fn;
      rules[j - 1] = DecisionFnRule{fn, fm};

      for (auto r : data.reaching(j)) {
        if (!follows[r]) continue;
        const int d = apply_rule(rules[j - 1], history(data[r], j));
        if (d != data[r].stages[j - 1].action) follows[r] = 0;
      }
    } catch (...) {
      rethrow_at_stage(j);
    }
  }
  fit.regime = Regime(std::move(rules));
  return fit;
}

}  // namespace dtr
