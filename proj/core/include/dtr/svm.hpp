#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dtr {

enum class Kernel { linear, rbf };

/// Kernel expansion f(x) = sum_i coef_i k(s_i, z) + intercept, where z is x
/// standardized with the stored center and scale.
class DecisionFunction {
 public:
  DecisionFunction() = default;
  DecisionFunction(Kernel kernel, double gamma, Eigen::VectorXd center, Eigen::VectorXd scale,
                   Eigen::MatrixXd support, Eigen::VectorXd coef, double intercept);

  /// Constant function (used when only one action is observed).
  static DecisionFunction constant(int dim, double value);

  double operator()(const double* x) const;

  Kernel kernel() const noexcept { return kernel_; }
  double gamma() const noexcept { return gamma_; }
  double intercept() const noexcept { return intercept_; }
  const Eigen::VectorXd& center() const noexcept { return center_; }
  const Eigen::VectorXd& scale() const noexcept { return scale_; }
  const Eigen::MatrixXd& support() const noexcept { return support_; }
  const Eigen::VectorXd& coef() const noexcept { return coef_; }
  int dim() const noexcept { return static_cast<int>(center_.size()); }
  /// Weight vector on standardized features; linear kernel only.
  const Eigen::VectorXd& linear_weights() const noexcept { return w_; }

 private:
  Kernel kernel_ = Kernel::linear;
  double gamma_ = 0.0;
  Eigen::VectorXd center_, scale_;
  Eigen::MatrixXd support_;  // one support point per row
  Eigen::VectorXd coef_;
  double intercept_ = 0.0;
  Eigen::VectorXd w_;
};

Eigen::MatrixXd kernel_matrix(Kernel kernel, double gamma, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B);

struct SvmSolution {
  Eigen::VectorXd alpha;
  double intercept = 0.0;
  /// Primal value 0.5 |w|^2 + sum C_i hinge_i at the solution.
  double primal = 0.0;
  double dual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Soft-margin SVM with per-sample box constraints 0 <= alpha_i <= C_i,
/// solved in the dual by SMO with second-order working-set selection.
/// `gram` is the kernel matrix, labels are +1/-1. Stops when the duality gap
/// falls below `gap_tolerance` times the gap at alpha = 0. The intercept is
/// the exact minimizer of the primal for the final alpha.
SvmSolution solve_weighted_svm(const Eigen::MatrixXd& gram, const std::vector<int>& labels,
                               const Eigen::VectorXd& box, double gap_tolerance = 1e-4,
                               long max_iterations = 0);

/// Minimizes sum_i box_i * max(0, 1 - y_i (g_i + b)) over b; returns (b, value).
std::pair<double, double> best_intercept(const Eigen::VectorXd& g, const std::vector<int>& labels,
                                         const Eigen::VectorXd& box);

}  // namespace dtr
