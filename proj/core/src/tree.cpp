#include "dtr/tree.hpp"

#include <algorithm>
#include <sstream>

#include "dtr/error.hpp"

namespace dtr {

CausalTree::CausalTree(std::vector<TreeNode> nodes, std::vector<std::string> feature_names)
    : nodes_(std::move(nodes)), names_(std::move(feature_names)) {
  if (nodes_.empty()) throw ConfigError("tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  for (int i = 0; i < n; ++i) {
    const auto& nd = nodes_[i];
    if (nd.leaf()) continue;
    if (nd.feature >= n_features() || nd.left <= i || nd.right <= i || nd.left >= n ||
        nd.right >= n)
      throw ConfigError("malformed tree node " + std::to_string(i));
  }
}

int CausalTree::leaf_count() const {
  int c = 0;
  for (const auto& nd : nodes_) c += nd.leaf();
  return c;
}

int CausalTree::depth() const {
  int d = 0;
  for (const auto& nd : nodes_) d = std::max(d, nd.depth);
  return d;
}

int CausalTree::leaf_of(const double* x) const {
  int i = 0;
  while (!nodes_[i].leaf()) {
    const auto& nd = nodes_[i];
    i = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return i;
}

std::string CausalTree::to_text() const {
  std::ostringstream os;
  auto rec = [&](auto&& self, int i, int indent) -> void {
    const auto& nd = nodes_[i];
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (nd.leaf()) {
      os << pad << "leaf: contrast " << nd.contrast << " (treated " << nd.n_treated
         << ", control " << nd.n_control << ")" << (nd.contrast > 0 ? " -> treat" : " -> no treat")
         << "\n";
      return;
    }
    os << pad << names_[nd.feature] << " <= " << nd.threshold << "\n";
    self(self, nd.left, indent + 1);
    os << pad << names_[nd.feature] << " > " << nd.threshold << "\n";
    self(self, nd.right, indent + 1);
  };
  rec(rec, 0, 0);
  return os.str();
}

nlohmann::json CausalTree::to_json() const {
  auto rec = [&](auto&& self, int i) -> nlohmann::json {
    const auto& nd = nodes_[i];
    if (nd.leaf())
      return {{"contrast", nd.contrast}, {"treated", nd.n_treated}, {"control", nd.n_control}};
    return {{"feature", names_[nd.feature]},
            {"threshold", nd.threshold},
            {"left", self(self, nd.left)},
            {"right", self(self, nd.right)}};
  };
  return {{"features", names_}, {"root", rec(rec, 0)}};
}

CausalTree CausalTree::from_json(const nlohmann::json& j) {
  try {
    std::vector<std::string> names = j.at("features").get<std::vector<std::string>>();
    std::vector<TreeNode> nodes;
    auto rec = [&](auto&& self, const nlohmann::json& n, int depth) -> int {
      const int id = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes[id].depth = depth;
      if (n.contains("feature")) {
        const auto name = n.at("feature").get<std::string>();
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw ConfigError("tree splits on unknown feature '" + name + "'");
        nodes[id].feature = static_cast<int>(it - names.begin());
        nodes[id].threshold = n.at("threshold").get<double>();
        const int l = self(self, n.at("left"), depth + 1);
        const int r = self(self, n.at("right"), depth + 1);
        nodes[id].left = l;
        nodes[id].right = r;
      } else {
        nodes[id].contrast = n.at("contrast").get<double>();
        nodes[id].n_treated = n.value("treated", 0);
        nodes[id].n_control = n.value("control", 0);
      }
      return id;
    };
    rec(rec, j.at("root"), 0);
    return CausalTree(std::move(nodes), std::move(names));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed tree: ") + e.what());
  }
}

}  // namespace dtr
