#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace dtr {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // x[feature] <= threshold
  int right = -1;
  double contrast = 0.0;
  int n_treated = 0;  // estimation rows in the node
  int n_control = 0;
  int depth = 0;

  bool leaf() const noexcept { return feature < 0; }
};

/// Binary partition of the feature space with a treatment contrast per leaf.
/// Node 0 is the root.
class CausalTree {
 public:
  CausalTree() = default;
  CausalTree(std::vector<TreeNode> nodes, std::vector<std::string> feature_names);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  int n_features() const noexcept { return static_cast<int>(names_.size()); }
  int leaf_count() const;
  int depth() const;

  int leaf_of(const double* x) const;
  double contrast(const double* x) const { return nodes_[leaf_of(x)].contrast; }

  std::string to_text() const;
  nlohmann::json to_json() const;
  static CausalTree from_json(const nlohmann::json& j);

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::string> names_;
};

}  // namespace dtr
