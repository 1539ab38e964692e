#include "dtr/ctree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtr/error.hpp"
#include "dtr/propensity.hpp"
#include "dtr/rng.hpp"

namespace dtr {
namespace {

// Weighted sufficient statistics for one action group.
struct Moments {
  double n = 0, w = 0, wy = 0, wyy = 0;

  void add(double weight, double y) {
    n += 1;
    w += weight;
    wy += weight * y;
    wyy += weight * y * y;
  }
  void remove(double weight, double y) {
    n -= 1;
    w -= weight;
    wy -= weight * y;
    wyy -= weight * y * y;
  }
  double mean() const { return wy / w; }
  double var() const { return std::max(0.0, wyy / w - mean() * mean()); }
};

struct NodeStats {
  Moments treated, control;
};

class Builder {
 public:
  Builder(const TreeData& d, const TreeHyperparams& h, const HonestSplit& s)
      : d_(d), h_(h), split_(s) {
    n_tr_ = static_cast<double>(s.train.size());
    n_est_ = static_cast<double>(s.estimate.size());
    weight_.resize(d.response.size());
    for (Eigen::Index i = 0; i < d.response.size(); ++i) {
      if (!h.use_iptw) weight_[i] = 1.0;
      else weight_[i] = d.actions[i] == 1 ? 1.0 / d.propensity[i] : 1.0 / (1.0 - d.propensity[i]);
    }
  }

  CausalTree run() {
    grow(split_.train, split_.estimate, 0);
    return CausalTree(std::move(nodes_), d_.names);
  }

 private:
  NodeStats stats(const std::vector<std::size_t>& rows) const {
    NodeStats s;
    for (auto i : rows) (d_.actions[i] ? s.treated : s.control).add(weight_[i], d_.response[i]);
    return s;
  }

  // Heterogeneity reward minus variance penalty for one leaf.
  double score(const NodeStats& s) const {
    const double n = s.treated.n + s.control.n;
    const double p = s.treated.n / n;
    const double c = s.treated.mean() - s.control.mean();
    return n / n_tr_ * c * c -
           (1.0 / n_tr_ + 1.0 / n_est_) * (s.treated.var() / p + s.control.var() / (1.0 - p));
  }

  struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  Candidate best_split(const std::vector<std::size_t>& train, const std::vector<std::size_t>& est,
                       const NodeStats& parent) const {
    Candidate best;
    const double base = score(parent);
    const double m = h_.min_leaf;
    const double tol = 1e-12 * (1.0 + std::abs(base));
    std::vector<std::size_t> tr = train, es = est;
    for (Eigen::Index f = 0; f < d_.features.cols(); ++f) {
      auto by_f = [&](std::size_t a, std::size_t b) {
        return d_.features(a, f) < d_.features(b, f);
      };
      std::stable_sort(tr.begin(), tr.end(), by_f);
      std::stable_sort(es.begin(), es.end(), by_f);
      NodeStats left, right = parent;
      double est_left_t = 0, est_left_c = 0;
      double est_t = 0, est_c = 0;
      for (auto i : es) (d_.actions[i] ? est_t : est_c) += 1;
      std::size_t e = 0;
      for (std::size_t k = 0; k + 1 < tr.size(); ++k) {
        const auto i = tr[k];
        const double y = d_.response[i];
        if (d_.actions[i]) {
          left.treated.add(weight_[i], y);
          right.treated.remove(weight_[i], y);
        } else {
          left.control.add(weight_[i], y);
          right.control.remove(weight_[i], y);
        }
        const double x0 = d_.features(i, f), x1 = d_.features(tr[k + 1], f);
        if (!(x0 < x1)) continue;
        const double t = 0.5 * (x0 + x1);
        if (left.treated.n < m || left.control.n < m || right.treated.n < m ||
            right.control.n < m)
          continue;
        while (e < es.size() && d_.features(es[e], f) <= t) {
          (d_.actions[es[e]] ? est_left_t : est_left_c) += 1;
          ++e;
        }
        if (est_left_t < m || est_left_c < m || est_t - est_left_t < m ||
            est_c - est_left_c < m)
          continue;
        const double gain = score(left) + score(right) - base;
        if (gain > best.gain + tol) {
          best = {static_cast<int>(f), t, gain};
        }
      }
    }
    return best;
  }

  int grow(const std::vector<std::size_t>& train, const std::vector<std::size_t>& est, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_[id].depth = depth;
    for (auto i : est) (d_.actions[i] ? nodes_[id].n_treated : nodes_[id].n_control) += 1;
    nodes_[id].contrast = leaf_contrast(d_, est, h_.use_iptw);

    if (depth >= h_.max_depth) return id;
    const NodeStats parent = stats(train);
    if (parent.treated.n < 1 || parent.control.n < 1) return id;
    const Candidate c = best_split(train, est, parent);
    if (c.feature < 0) return id;

    std::vector<std::size_t> tl, tr, el, er;
    for (auto i : train) (d_.features(i, c.feature) <= c.threshold ? tl : tr).push_back(i);
    for (auto i : est) (d_.features(i, c.feature) <= c.threshold ? el : er).push_back(i);
    nodes_[id].feature = c.feature;
    nodes_[id].threshold = c.threshold;
    const int l = grow(tl, el, depth + 1);
    const int r = grow(tr, er, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  const TreeData& d_;
  const TreeHyperparams& h_;
  const HonestSplit& split_;
  double n_tr_ = 0, n_est_ = 0;
  std::vector<double> weight_;
  std::vector<TreeNode> nodes_;
};

void check_data(const TreeData& d) {
  const auto n = d.features.rows();
  if (static_cast<Eigen::Index>(d.actions.size()) != n || d.response.size() != n ||
      d.propensity.size() != n)
    throw ShapeError("tree inputs have different lengths");
  if (static_cast<Eigen::Index>(d.names.size()) != d.features.cols())
    throw ShapeError("tree feature names do not match the feature columns");
}

}  // namespace

HonestSplit honest_split(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("honest fraction must be in (0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  HonestSplit s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
  s.estimate.assign(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.estimate.begin(), s.estimate.end());
  return s;
}

double leaf_contrast(const TreeData& d, const std::vector<std::size_t>& rows, bool iptw) {
  double w1 = 0, s1 = 0, w0 = 0, s0 = 0;
  for (auto i : rows) {
    if (d.actions[i]) {
      const double w = iptw ? 1.0 / d.propensity[i] : 1.0;
      w1 += w;
      s1 += w * d.response[i];
    } else {
      const double w = iptw ? 1.0 / (1.0 - d.propensity[i]) : 1.0;
      w0 += w;
      s0 += w * d.response[i];
    }
  }
  if (w1 <= 0 || w0 <= 0) throw DataError("leaf needs both treated and control rows");
  return s1 / w1 - s0 / w0;
}

CausalTree build_causal_tree(const TreeData& d, const TreeHyperparams& hyper) {
  return build_causal_tree(d, hyper,
                           honest_split(static_cast<std::size_t>(d.features.rows()),
                                        hyper.honest_fraction, hyper.seed));
}

CausalTree build_causal_tree(const TreeData& d, const TreeHyperparams& hyper,
                             const HonestSplit& split) {
  check_data(d);
  if (hyper.min_leaf < 2) throw ConfigError("min_leaf must be at least 2");
  if (hyper.max_depth < 0) throw ConfigError("max_depth must be nonnegative");
  int t_est = 0, c_est = 0, t_tr = 0, c_tr = 0;
  for (auto i : split.estimate) (d.actions[i] ? t_est : c_est) += 1;
  for (auto i : split.train) (d.actions[i] ? t_tr : c_tr) += 1;
  if (t_est == 0 || c_est == 0 || t_tr == 0 || c_tr == 0)
    throw DataError("causal tree needs treated and control rows in both honest halves (treated " +
                    std::to_string(t_tr + t_est) + ", control " + std::to_string(c_tr + c_est) +
                    ")");
  return Builder(d, hyper, split).run();
}

FeatureMap default_tree_features(const Schema& schema, int stage) {
  std::string f;
  for (const auto& l : schema.labels(stage)) f += (f.empty() ? "" : ",") + l;
  return FeatureMap::parse(f, schema, stage, false);
}

FitResult causal_tree_fit(const Dataset& data, const std::vector<CtreeStageSpec>& specs) {
  const int K = data.stages();
  if (static_cast<int>(specs.size()) != K)
    throw ConfigError("expected " + std::to_string(K) + " tree stage specs");
  FitResult fit;
  fit.method = Method::ctree;
  fit.stages.resize(static_cast<std::size_t>(K));
  fit.values.resize(static_cast<std::size_t>(K));
  std::vector<double> v = data.outcomes();
  std::vector<Rule> rules(static_cast<std::size_t>(K));

  for (int j = K; j >= 1; --j) {
    try {
      const auto& spec = specs[j - 1];
      if (spec.features.empty()) throw ConfigError("tree features missing", j);
      if (spec.propensity.empty() && spec.hyper.use_iptw)
        throw ConfigError("propensity features missing", j);
      const auto rows = data.reaching(j);
      StageFit& sf = fit.stages[j - 1];
      sf.stage = j;
      sf.rows = static_cast<int>(rows.size());

      TreeData td;
      td.features = design(spec.features, data, rows);
      td.names = spec.features.labels();
      td.actions.resize(rows.size());
      td.response.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        td.actions[r] = data[rows[r]].stages[j - 1].action;
        td.response[static_cast<Eigen::Index>(r)] = v[rows[r]];
      }
      if (!spec.propensity.empty()) {
        auto pf = fit_propensity(data, spec.propensity, rows);
        sf.propensity = pf.model;
        sf.alpha = pf.logistic.coef;
        sf.clipped = pf.clipped;
        td.propensity = pf.fitted;
      } else {
        td.propensity = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(rows.size()), 0.5);
      }
      TreeHyperparams hp = spec.hyper;
      hp.seed = derive_seed(spec.hyper.seed, static_cast<std::uint64_t>(j));
      auto tree = std::make_shared<const CausalTree>(build_causal_tree(td, hp));
      sf.tree = tree;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const Eigen::VectorXd x = td.features.row(static_cast<Eigen::Index>(r)).transpose();
        const double c = tree->contrast(x.data());
        v[rows[r]] += (c > 0 ? c : 0.0) - td.actions[r] * c;
      }
      fit.values[j - 1] = v;
      rules[j - 1] = TreeRule{tree, spec.features};
    } catch (...) {
      rethrow_at_stage(j);
    }
  }
  fit.regime = Regime(std::move(rules));
  for (const auto& col : fit.values)
    fit.mean_values.push_back(std::accumulate(col.begin(), col.end(), 0.0) /
                              static_cast<double>(col.size()));
  return fit;
}

}  // namespace dtr
