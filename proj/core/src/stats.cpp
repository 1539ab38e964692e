#include "dtr/stats.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>

#include "dtr/error.hpp"
#include "dtr/rng.hpp"

namespace dtr {
namespace {

constexpr double kRankTolerance = 1e-10;

struct PivotedSolve {
  Eigen::VectorXd x;
  int rank = 0;
  double condition = 0.0;
};

// Solves M x = b by column-pivoted QR after scaling columns to unit norm so
// the rank decision does not depend on the units of each column.
PivotedSolve pivoted_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                           const std::vector<std::string>& labels, const std::string& what) {
  const Eigen::Index p = M.cols();
  Eigen::VectorXd scale(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double nk = M.col(k).norm();
    scale[k] = nk > 0 ? 1.0 / nk : 1.0;
  }
  const Eigen::MatrixXd Ms = M * scale.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Ms);
  qr.setThreshold(kRankTolerance);
  PivotedSolve out;
  out.rank = static_cast<int>(qr.rank());
  if (out.rank < p || M.rows() < p) {
    std::vector<std::string> bad;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = out.rank; k < p; ++k) {
      const auto c = static_cast<std::size_t>(perm[k]);
      bad.push_back(c < labels.size() ? labels[c] : "column " + std::to_string(c + 1));
    }
    std::string msg = what + " is singular (rank " + std::to_string(out.rank) + " of " +
                      std::to_string(p) + "); dependent columns:";
    for (const auto& s : bad) msg += " " + s;
    throw SingularError(msg, bad);
  }
  const auto R = qr.matrixR().topLeftCorner(p, p).diagonal().cwiseAbs();
  out.condition = p > 0 ? R.maxCoeff() / R.minCoeff() : 1.0;
  out.x = scale.asDiagonal() * qr.solve(b);
  return out;
}

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

DesignMatrix hcat(const std::vector<const DesignMatrix*>& blocks,
                  const std::vector<std::string>& prefixes) {
  DesignMatrix out;
  Eigen::Index rows = -1, cols = 0;
  for (const auto* b : blocks) {
    if (b->cols() == 0) continue;
    if (rows >= 0 && b->rows() != rows) throw ShapeError("design blocks have different row counts");
    rows = b->rows();
    cols += b->cols();
  }
  out.values.resize(std::max<Eigen::Index>(rows, 0), cols);
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto* b = blocks[k];
    if (b->cols() == 0) continue;
    out.values.middleCols(at, b->cols()) = b->values;
    at += b->cols();
    for (Eigen::Index c = 0; c < b->cols(); ++c) {
      const std::string base =
          static_cast<std::size_t>(c) < b->labels.size() ? b->labels[c] : std::to_string(c + 1);
      out.labels.push_back(k < prefixes.size() ? prefixes[k] + base : base);
    }
  }
  return out;
}

LinearFit ols_fit(const DesignMatrix& X, const Eigen::VectorXd& y,
                  const std::optional<Eigen::VectorXd>& weights) {
  const Eigen::Index n = X.rows();
  if (y.size() != n) throw ShapeError("response length does not match the design");
  if (!X.values.allFinite() || !y.allFinite()) throw DataError("non-finite value in regression");
  Eigen::MatrixXd Xw = X.values;
  Eigen::VectorXd yw = y;
  if (weights) {
    if (weights->size() != n) throw ShapeError("weight length does not match the design");
    if ((weights->array() < 0).any()) throw DataError("regression weights must be nonnegative");
    const Eigen::VectorXd s = weights->cwiseSqrt();
    Xw = s.asDiagonal() * Xw;
    yw = s.cwiseProduct(yw);
  }
  auto sol = pivoted_solve(Xw, yw, X.labels, "regression design");
  LinearFit fit;
  fit.coef = sol.x;
  fit.rank = sol.rank;
  fit.condition = sol.condition;
  fit.residuals = y - X.values * fit.coef;
  return fit;
}

double logistic_log_likelihood(const Eigen::MatrixXd& X, const std::vector<int>& a,
                               const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = X * coef;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += a[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

Eigen::VectorXd logistic_score(const Eigen::MatrixXd& X, const std::vector<int>& a,
                               const Eigen::VectorXd& coef) {
  const Eigen::VectorXd eta = X * coef;
  Eigen::VectorXd r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r[i] = a[i] - expit(eta[i]);
  return X.transpose() * r;
}

LogisticFit logistic_fit(const DesignMatrix& X, const std::vector<int>& a,
                         const LogisticOptions& options) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (static_cast<Eigen::Index>(a.size()) != n) throw ShapeError("action length does not match the design");
  bool has0 = false, has1 = false;
  for (int v : a) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw DataError("logistic response must be binary");
  }
  if ((!has0 || !has1) && !options.allow_degenerate)
    throw ConvergenceError("logistic regression needs both actions; only " +
                           std::string(has1 ? "1" : "0") + " observed");
  // Rank check up front so separation and collinearity are reported apart.
  pivoted_solve(X.values, Eigen::VectorXd::Zero(n), X.labels, "propensity design");

  LogisticFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  double ll = logistic_log_likelihood(X.values, a, fit.coef);
  Eigen::VectorXd score = logistic_score(X.values, a, fit.coef);
  int polish = 0;
  for (fit.iterations = 0; fit.iterations < options.max_iterations; ++fit.iterations) {
    const double sn = score.lpNorm<Eigen::Infinity>();
    if (sn <= options.tolerance) {
      // Two extra Newton steps are nearly free and push the score to round-off.
      if (++polish > 2) break;
    }
    const Eigen::VectorXd eta = X.values * fit.coef;
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = expit(eta[i]);
      w[i] = std::max(pi * (1.0 - pi), 1e-300);
    }
    const Eigen::MatrixXd H = X.values.transpose() * w.asDiagonal() * X.values;
    const Eigen::VectorXd step = H.colPivHouseholderQr().solve(score);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool improved = false;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = fit.coef + t * step;
      const double llt = logistic_log_likelihood(X.values, a, trial);
      if (std::isfinite(llt) && llt >= ll - 1e-12 * std::abs(ll)) {
        fit.coef = trial;
        improved = llt > ll;
        ll = llt;
        break;
      }
    }
    score = logistic_score(X.values, a, fit.coef);
    if (!improved && polish > 0) break;
  }
  fit.log_likelihood = ll;
  fit.score_norm = score.lpNorm<Eigen::Infinity>();
  fit.converged = fit.score_norm <= options.tolerance && has0 && has1;
  // Under complete separation the score vanishes while the coefficients diverge.
  if (fit.converged) {
    const Eigen::VectorXd eta = X.values * fit.coef;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(a[i] - expit(eta[i])));
    if (worst < 1e-6) fit.converged = false;
  }
  if (!fit.converged && !options.allow_degenerate)
    throw ConvergenceError("logistic regression did not converge after " +
                           std::to_string(fit.iterations) + " iterations (score " +
                           std::to_string(fit.score_norm) +
                           "); the actions may be perfectly separated by the covariates");
  return fit;
}

JointEeSolution solve_joint_linear_ee(const DesignMatrix& contrast, const std::vector<int>& actions,
                                      const DesignMatrix& tfree, const Eigen::VectorXd& propensity,
                                      const Eigen::VectorXd& response) {
  const Eigen::Index n = contrast.rows();
  const Eigen::Index pr = contrast.cols(), pd = tfree.cols();
  if (static_cast<Eigen::Index>(actions.size()) != n || propensity.size() != n ||
      response.size() != n || (pd > 0 && tfree.rows() != n))
    throw ShapeError("estimating-equation inputs have different lengths");
  Eigen::VectorXd A(n);
  for (Eigen::Index i = 0; i < n; ++i) A[i] = actions[i];
  const Eigen::MatrixXd AR = A.asDiagonal() * contrast.values;
  const Eigen::VectorXd centred = A - propensity;
  const Eigen::MatrixXd Rw = centred.asDiagonal() * contrast.values;

  Eigen::MatrixXd M(pr + pd, pr + pd);
  Eigen::VectorXd b(pr + pd);
  M.topLeftCorner(pr, pr) = Rw.transpose() * AR;
  b.head(pr) = Rw.transpose() * response;
  if (pd > 0) {
    M.topRightCorner(pr, pd) = Rw.transpose() * tfree.values;
    M.bottomLeftCorner(pd, pr) = tfree.values.transpose() * AR;
    M.bottomRightCorner(pd, pd) = tfree.values.transpose() * tfree.values;
    b.tail(pd) = tfree.values.transpose() * response;
  }
  std::vector<std::string> labels;
  for (const auto& l : contrast.labels) labels.push_back("psi:" + l);
  for (const auto& l : tfree.labels) labels.push_back("xi:" + l);
  auto sol = pivoted_solve(M, b, labels, "estimating-equation system");

  JointEeSolution out;
  out.psi = sol.x.head(pr);
  out.xi = sol.x.tail(pd);
  out.condition = sol.condition;
  const double scale =
      M.lpNorm<Eigen::Infinity>() * sol.x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
  out.relative_residual = scale > 0 ? (M * sol.x - b).lpNorm<Eigen::Infinity>() / scale : 0.0;
  return out;
}

namespace {

struct Tracker {
  const Objective* f = nullptr;
  const OptimizerConfig* cfg = nullptr;
  long evaluations = 0;
  std::vector<double> best_x;
  double best = -std::numeric_limits<double>::infinity();
  std::exception_ptr error;

  std::vector<double> clamp(std::vector<double> x) const {
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (k < cfg->lower.size()) x[k] = std::max(x[k], cfg->lower[k]);
      if (k < cfg->upper.size()) x[k] = std::min(x[k], cfg->upper[k]);
    }
    return x;
  }

  double eval(std::vector<double> x) {
    x = clamp(std::move(x));
    ++evaluations;
    const double v = (*f)(x);
    if (!std::isfinite(v)) throw EvaluationError("objective is not finite", x);
    if (v > best) {
      best = v;
      best_x = x;
    }
    return v;
  }
};

double gsl_callback(const gsl_vector* v, void* params) {
  auto* t = static_cast<Tracker*>(params);
  if (t->error) return 1e300;
  std::vector<double> x(v->size);
  for (std::size_t k = 0; k < v->size; ++k) x[k] = gsl_vector_get(v, k);
  try {
    return -t->eval(std::move(x));
  } catch (...) {
    t->error = std::current_exception();
    return 1e300;
  }
}

void nelder_mead(Tracker& t, const std::vector<double>& start, const std::vector<double>& step,
                 long budget) {
  const std::size_t d = start.size();
  if (d == 0) {
    t.eval(start);
    return;
  }
  const long stop_at = t.evaluations + budget;
  gsl_multimin_function fn{&gsl_callback, d, &t};
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(d), gsl_vector_free);
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> ss(gsl_vector_alloc(d), gsl_vector_free);
  for (std::size_t k = 0; k < d; ++k) {
    gsl_vector_set(x.get(), k, start[k]);
    gsl_vector_set(ss.get(), k, step[k] > 0 ? step[k] : 1.0);
  }
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, d),
      gsl_multimin_fminimizer_free);
  gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), ss.get());
  if (t.error) std::rethrow_exception(t.error);
  while (t.evaluations < stop_at) {
    const int status = gsl_multimin_fminimizer_iterate(s.get());
    if (t.error) std::rethrow_exception(t.error);
    if (status) break;
    if (gsl_multimin_fminimizer_size(s.get()) < t.cfg->simplex_tolerance) break;
  }
}

std::vector<double> grid_steps(const OptimizerConfig& cfg, const std::vector<std::size_t>& at) {
  std::vector<double> step(cfg.grid.size(), 1.0);
  for (std::size_t k = 0; k < cfg.grid.size(); ++k) {
    if (k < cfg.initial_step.size()) {
      step[k] = cfg.initial_step[k];
      continue;
    }
    const auto& g = cfg.grid[k];
    double s = 0.0;
    if (at[k] + 1 < g.size()) s = std::max(s, std::abs(g[at[k] + 1] - g[at[k]]));
    if (at[k] > 0) s = std::max(s, std::abs(g[at[k]] - g[at[k] - 1]));
    step[k] = s > 0 ? s : 1.0;
  }
  return step;
}

}  // namespace

OptimizerResult maximize(const Objective& f, const OptimizerConfig& cfg) {
  static const bool quiet = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)quiet;
  if (cfg.max_evaluations < 1) throw ConfigError("optimizer needs max_evaluations >= 1");
  Tracker t;
  t.f = &f;
  t.cfg = &cfg;
  const bool use_grid = cfg.method == OptimizerMethod::grid ||
                        cfg.method == OptimizerMethod::grid_then_nelder_mead;
  if (use_grid) {
    if (cfg.grid.empty()) throw ConfigError("grid search needs a grid");
    double total = 1.0;
    for (const auto& g : cfg.grid) {
      if (g.empty()) throw ConfigError("grid dimension has no points");
      for (double v : g)
        if (!std::isfinite(v)) throw ConfigError("grid bounds must be finite");
      total *= static_cast<double>(g.size());
    }
    if (total > static_cast<double>(cfg.max_evaluations))
      throw ConfigError("grid has " + std::to_string(static_cast<long long>(total)) +
                        " points, more than max_evaluations");
    const std::size_t d = cfg.grid.size();
    std::vector<std::size_t> idx(d, 0), best_idx(d, 0);
    std::vector<double> x(d);
    double best = -std::numeric_limits<double>::infinity();
    for (;;) {
      for (std::size_t k = 0; k < d; ++k) x[k] = cfg.grid[k][idx[k]];
      const double v = t.eval(x);
      if (v > best) {
        best = v;
        best_idx = idx;
      }
      std::size_t k = 0;
      while (k < d && ++idx[k] == cfg.grid[k].size()) idx[k++] = 0;
      if (k == d) break;
    }
    if (cfg.method == OptimizerMethod::grid_then_nelder_mead) {
      const double grid_best = t.best;
      const auto grid_x = t.best_x;
      nelder_mead(t, t.best_x, grid_steps(cfg, best_idx),
                  std::max<long>(1, cfg.max_evaluations - t.evaluations));
      // The tracker only replaces the incumbent on strict improvement.
      if (t.best < grid_best) {
        t.best = grid_best;
        t.best_x = grid_x;
      }
    }
  } else {
    std::vector<std::vector<double>> starts = cfg.starts;
    if (cfg.method == OptimizerMethod::multi_start && cfg.random_starts > 0) {
      if (cfg.lower.size() != cfg.upper.size() || cfg.lower.empty())
        throw ConfigError("random starts need finite lower and upper bounds");
      Rng rng(cfg.seed);
      for (int s = 0; s < cfg.random_starts; ++s) {
        std::vector<double> x(cfg.lower.size());
        for (std::size_t k = 0; k < x.size(); ++k)
          x[k] = cfg.lower[k] + rng.uniform() * (cfg.upper[k] - cfg.lower[k]);
        starts.push_back(std::move(x));
      }
    }
    if (starts.empty()) throw ConfigError("Nelder-Mead needs at least one start point");
    if (cfg.method == OptimizerMethod::nelder_mead) starts.resize(1);
    const long per_start = std::max<long>(1, cfg.max_evaluations / static_cast<long>(starts.size()));
    for (const auto& s : starts) {
      std::vector<double> step(s.size(), 1.0);
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k < cfg.initial_step.size()) step[k] = cfg.initial_step[k];
        else if (k < cfg.lower.size() && k < cfg.upper.size())
          step[k] = 0.1 * (cfg.upper[k] - cfg.lower[k]);
      }
      nelder_mead(t, s, step, per_start);
    }
  }
  return {t.best_x, t.best, t.evaluations};
}

}  // namespace dtr
