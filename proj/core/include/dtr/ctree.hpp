#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dtr/data.hpp"
#include "dtr/features.hpp"
#include "dtr/fit.hpp"
#include "dtr/tree.hpp"

namespace dtr {

struct TreeHyperparams {
  int min_leaf = 10;  // per action, in both the training and estimation halves
  int max_depth = 4;
  double honest_fraction = 0.5;  // share of rows used to choose splits
  bool use_iptw = true;
  std::uint64_t seed = 1;
};

/// Stage rows for tree building: one feature row per individual.
struct TreeData {
  Eigen::MatrixXd features;
  std::vector<int> actions;
  Eigen::VectorXd response;
  Eigen::VectorXd propensity;
  std::vector<std::string> names;
};

struct HonestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> estimate;
};

/// Random partition of 0..n-1 into a training part of size
/// floor(fraction * n) and an estimation part.
HonestSplit honest_split(std::size_t n, double fraction, std::uint64_t seed);

/// Difference of (inverse-propensity weighted, when `iptw`) mean responses
/// between treated and control rows among `rows`.
double leaf_contrast(const TreeData& d, const std::vector<std::size_t>& rows, bool iptw);

CausalTree build_causal_tree(const TreeData& d, const TreeHyperparams& hyper);
CausalTree build_causal_tree(const TreeData& d, const TreeHyperparams& hyper,
                             const HonestSplit& split);

struct CtreeStageSpec {
  FeatureMap features;    // split variables; no intercept
  FeatureMap propensity;  // logistic design for the IPTW weights
  TreeHyperparams hyper;
};

/// Backward fit: per stage a propensity model, an honest causal tree on the
/// current response and the update V_j = V_{j+1} + (I{C > 0} - A_j) C.
FitResult causal_tree_fit(const Dataset& data, const std::vector<CtreeStageSpec>& specs);

/// Default split variables for stage j: that stage's covariates.
FeatureMap default_tree_features(const Schema& schema, int stage);

}  // namespace dtr
