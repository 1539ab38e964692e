#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dtr {

struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> labels;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }
};

/// Horizontal concatenation; labels are prefixed with `prefixes[k]`.
DesignMatrix hcat(const std::vector<const DesignMatrix*>& blocks,
                  const std::vector<std::string>& prefixes = {});

struct LinearFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  int rank = 0;
  /// Ratio of largest to smallest |R_kk| of the pivoted QR.
  double condition = 0.0;
};

/// Least squares, weighted when `weights` is given. Throws SingularError
/// naming the dependent columns when the design is rank deficient.
LinearFit ols_fit(const DesignMatrix& X, const Eigen::VectorXd& y,
                  const std::optional<Eigen::VectorXd>& weights = std::nullopt);

struct LogisticOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // max-norm of the score
  /// Return the last iterate instead of throwing when the data are separated.
  bool allow_degenerate = false;
};

struct LogisticFit {
  Eigen::VectorXd coef;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double score_norm = 0.0;
};

/// Logistic regression by IRLS with step halving.
LogisticFit logistic_fit(const DesignMatrix& X, const std::vector<int>& a,
                         const LogisticOptions& options = {});
double logistic_log_likelihood(const Eigen::MatrixXd& X, const std::vector<int>& a,
                               const Eigen::VectorXd& coef);
Eigen::VectorXd logistic_score(const Eigen::MatrixXd& X, const std::vector<int>& a,
                               const Eigen::VectorXd& coef);

struct JointEeSolution {
  Eigen::VectorXd psi;
  Eigen::VectorXd xi;
  double relative_residual = 0.0;
  double condition = 0.0;
};

/// Solves the stacked linear system
///   sum_i R_i (A_i - pi_i) (v_i - A_i R_i' psi - D_i' xi) = 0
///   sum_i D_i             (v_i - A_i R_i' psi - D_i' xi) = 0
/// for (psi, xi). `contrast` holds R (not multiplied by A). An empty
/// `tfree` drops the second block.
JointEeSolution solve_joint_linear_ee(const DesignMatrix& contrast, const std::vector<int>& actions,
                                      const DesignMatrix& tfree, const Eigen::VectorXd& propensity,
                                      const Eigen::VectorXd& response);

enum class OptimizerMethod { nelder_mead, grid_then_nelder_mead, multi_start, grid };

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::grid_then_nelder_mead;
  /// Candidate values per dimension for the grid methods.
  std::vector<std::vector<double>> grid;
  /// Start points for nelder_mead / multi_start.
  std::vector<std::vector<double>> starts;
  /// Additional uniformly drawn starts inside `lower`/`upper` for multi_start.
  int random_starts = 0;
  std::vector<double> lower, upper;
  /// Initial simplex edge per dimension; grid spacing is used when empty.
  std::vector<double> initial_step;
  long max_evaluations = 20000;
  double simplex_tolerance = 1e-8;
  std::uint64_t seed = 1;
};

struct OptimizerResult {
  std::vector<double> argmax;
  double value = 0.0;
  long evaluations = 0;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Maximizes `f`. Non-finite values raise EvaluationError carrying the
/// offending point.
OptimizerResult maximize(const Objective& f, const OptimizerConfig& config);

}  // namespace dtr
