#include "dtr/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtr/error.hpp"

namespace dtr {

DecisionFunction::DecisionFunction(Kernel kernel, double gamma, Eigen::VectorXd center,
                                   Eigen::VectorXd scale, Eigen::MatrixXd support,
                                   Eigen::VectorXd coef, double intercept)
    : kernel_(kernel),
      gamma_(gamma),
      center_(std::move(center)),
      scale_(std::move(scale)),
      support_(std::move(support)),
      coef_(std::move(coef)),
      intercept_(intercept) {
  if (center_.size() != scale_.size() || support_.rows() != coef_.size() ||
      (support_.rows() > 0 && support_.cols() != center_.size()))
    throw ShapeError("decision function dimensions disagree");
  if (kernel_ == Kernel::linear) w_ = support_.transpose() * coef_;
  if (support_.rows() == 0) w_ = Eigen::VectorXd::Zero(center_.size());
}

DecisionFunction DecisionFunction::constant(int dim, double value) {
  return DecisionFunction(Kernel::linear, 0.0, Eigen::VectorXd::Zero(dim),
                          Eigen::VectorXd::Ones(dim), Eigen::MatrixXd(0, dim), Eigen::VectorXd(0),
                          value);
}

double DecisionFunction::operator()(const double* x) const {
  const auto d = center_.size();
  Eigen::VectorXd z(d);
  for (Eigen::Index k = 0; k < d; ++k) z[k] = (x[k] - center_[k]) / scale_[k];
  if (kernel_ == Kernel::linear) return w_.dot(z) + intercept_;
  double f = intercept_;
  for (Eigen::Index i = 0; i < support_.rows(); ++i)
    f += coef_[i] * std::exp(-gamma_ * (support_.row(i).transpose() - z).squaredNorm());
  return f;
}

Eigen::MatrixXd kernel_matrix(Kernel kernel, double gamma, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K = A * B.transpose();
  if (kernel == Kernel::linear) return K;
  const Eigen::VectorXd a2 = A.rowwise().squaredNorm();
  const Eigen::VectorXd b2 = B.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j)
      K(i, j) = std::exp(-gamma * std::max(0.0, a2[i] + b2[j] - 2.0 * K(i, j)));
  return K;
}

std::pair<double, double> best_intercept(const Eigen::VectorXd& g, const std::vector<int>& labels,
                                         const Eigen::VectorXd& box) {
  const auto n = static_cast<std::size_t>(g.size());
  // Each term is a hinge in b with a kink at y_i - g_i: positives decrease
  // to the kink then flatten, negatives are flat then increase.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> kink(n);
  double slope = 0.0;  // slope left of every kink
  for (std::size_t i = 0; i < n; ++i) {
    kink[i] = labels[i] - g[static_cast<Eigen::Index>(i)];
    if (labels[i] > 0) slope -= box[static_cast<Eigen::Index>(i)];
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return kink[a] < kink[b]; });
  auto value_at = [&](double b) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      v += box[static_cast<Eigen::Index>(i)] *
           std::max(0.0, 1.0 - labels[i] * (g[static_cast<Eigen::Index>(i)] + b));
    return v;
  };
  if (n == 0) return {0.0, 0.0};
  double b = kink[order.front()];
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = order[k];
    slope += box[static_cast<Eigen::Index>(i)];  // either sign: slope rises by C_i
    b = kink[i];
    if (slope >= 0.0) {
      if (slope == 0.0 && k + 1 < n) b = 0.5 * (kink[i] + kink[order[k + 1]]);
      break;
    }
  }
  return {b, value_at(b)};
}

SvmSolution solve_weighted_svm(const Eigen::MatrixXd& gram, const std::vector<int>& labels,
                               const Eigen::VectorXd& box, double gap_tolerance,
                               long max_iterations) {
  const Eigen::Index n = gram.rows();
  if (gram.cols() != n || static_cast<Eigen::Index>(labels.size()) != n || box.size() != n)
    throw ShapeError("svm problem dimensions disagree");
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) pos = true;
    else if (y == -1) neg = true;
    else throw DataError("svm labels must be +1 or -1");
  }
  if (!pos || !neg) throw DataError("svm needs both classes");
  if ((box.array() < 0.0).any()) throw DataError("svm box constraints must be nonnegative");
  if (max_iterations <= 0) max_iterations = std::max<long>(100000, 200 * static_cast<long>(n));

  constexpr double tau = 1e-12;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);  // gradient of 0.5 a'Qa - e'a
  std::vector<double> y(labels.begin(), labels.end());

  auto objective_gap = [&](double* primal, double* dual, double* b) {
    // y_i * g(x_i) = G_i + 1 where g excludes the intercept.
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = y[i] * (G[i] + 1.0);
    const double quad = alpha.dot(G + Eigen::VectorXd::Ones(n));  // a'Qa
    auto [bb, loss] = best_intercept(g, labels, box);
    *b = bb;
    *primal = 0.5 * quad + loss;
    *dual = alpha.sum() - 0.5 * quad;
    return *primal - *dual;
  };

  SvmSolution sol;
  double primal, dual, b;
  const double gap0 = objective_gap(&primal, &dual, &b);
  const double target = std::max(gap_tolerance * gap0, 1e-14 * (1.0 + std::abs(primal)));
  const long check_every = std::max<long>(10, static_cast<long>(n) / 4);
  auto upper = [&](Eigen::Index t) { return alpha[t] >= box[t]; };
  auto lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

  long it = 0;
  bool done = gap0 <= target;
  while (!done && it < max_iterations) {
    double gmax = -INFINITY;
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y[t] > 0 ? !upper(t) : !lower(t)) {
        const double v = -y[t] * G[t];
        if (v > gmax) {
          gmax = v;
          i = t;
        }
      }
    }
    Eigen::Index j = -1;
    double best = INFINITY;
    double gmin = INFINITY;
    if (i >= 0) {
      for (Eigen::Index t = 0; t < n; ++t) {
        if (y[t] > 0 ? !lower(t) : !upper(t)) {
          const double v = -y[t] * G[t];
          gmin = std::min(gmin, v);
          const double diff = gmax - v;
          if (diff > 0) {
            double quad = gram(i, i) + gram(t, t) - 2.0 * gram(i, t);
            if (quad <= 0) quad = tau;
            const double obj = -(diff * diff) / quad;
            if (obj <= best) {
              best = obj;
              j = t;
            }
          }
        }
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < 1e-12) break;  // KKT satisfied to round-off

    const double Ci = box[i], Cj = box[j];
    const double ai = alpha[i], aj = alpha[j];
    double quad = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
    if (quad <= 0) quad = tau;
    if (y[i] != y[j]) {
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > Ci - Cj) {
        if (alpha[i] > Ci) { alpha[i] = Ci; alpha[j] = Ci - diff; }
      } else {
        if (alpha[j] > Cj) { alpha[j] = Cj; alpha[i] = Cj + diff; }
      }
    } else {
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > Ci) {
        if (alpha[i] > Ci) { alpha[i] = Ci; alpha[j] = sum - Ci; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      }
      if (sum > Cj) {
        if (alpha[j] > Cj) { alpha[j] = Cj; alpha[i] = sum - Cj; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double di = alpha[i] - ai, dj = alpha[j] - aj;
    for (Eigen::Index t = 0; t < n; ++t)
      G[t] += y[t] * (y[i] * gram(t, i) * di + y[j] * gram(t, j) * dj);
    ++it;
    if (it % check_every == 0) done = objective_gap(&primal, &dual, &b) <= target;
  }
  const double gap = objective_gap(&primal, &dual, &b);
  sol.alpha = alpha;
  sol.intercept = b;
  sol.primal = primal;
  sol.dual = dual;
  sol.iterations = static_cast<int>(it);
  sol.converged = gap <= target || it < max_iterations;
  return sol;
}

}  // namespace dtr
