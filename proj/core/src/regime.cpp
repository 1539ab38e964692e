#include "dtr/regime.hpp"

#include <cmath>
#include <sstream>

#include "dtr/error.hpp"

namespace dtr {
namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(std::abs(x) >= 100 ? 0 : 4);
  if (std::abs(x) >= 100) os << std::fixed;
  os << x;
  return os.str();
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::vector<double> evaluate_map(const FeatureMap& m, const History& h) {
  std::vector<double> x(static_cast<std::size_t>(m.size()));
  m.evaluate(h, x.data());
  return x;
}

}  // namespace

double rule_score(const Rule& rule, const History& h) {
  return std::visit(
      overloaded{
          [&](const LinearSignRule& r) {
            if (r.coef.size() != r.features.size())
              throw ShapeError("rule has " + std::to_string(r.coef.size()) +
                                   " coefficients for " + std::to_string(r.features.size()) +
                                   " features",
                               h.stage());
            return r.coef.dot(r.features(h));
          },
          [&](const ThresholdRule& r) {
            const double x = h.covariate(r.variable.stage, r.variable.index);
            return r.direction == Direction::below ? r.cutoff - x : x - r.cutoff;
          },
          [&](const TreeRule& r) {
            const auto x = evaluate_map(r.features, h);
            if (static_cast<int>(x.size()) != r.tree->n_features())
              throw ShapeError("tree expects " + std::to_string(r.tree->n_features()) +
                                   " features",
                               h.stage());
            return r.tree->contrast(x.data());
          },
          [&](const DecisionFnRule& r) {
            const auto x = evaluate_map(r.features, h);
            if (static_cast<int>(x.size()) != r.fn->dim())
              throw ShapeError("decision function expects " + std::to_string(r.fn->dim()) +
                                   " features",
                               h.stage());
            return (*r.fn)(x.data());
          },
          [&](const ExpressionRule& r) { return r.expr(h); },
      },
      rule);
}

int apply_rule(const Rule& rule, const History& h) { return rule_score(rule, h) > 0.0 ? 1 : 0; }

std::optional<double> implied_threshold(const Rule& rule) {
  if (auto* t = std::get_if<ThresholdRule>(&rule)) return t->cutoff;
  if (auto* l = std::get_if<LinearSignRule>(&rule)) {
    if (l->features.intercept_slope() && l->coef.size() == 2 && l->coef[1] != 0.0)
      return -l->coef[0] / l->coef[1];
  }
  return std::nullopt;
}

std::string describe(const Rule& rule) {
  return std::visit(
      overloaded{
          [](const LinearSignRule& r) -> std::string {
            if (r.features.intercept_slope() && r.coef.size() == 2) {
              const auto& name = r.features.labels()[1];
              const double a = r.coef[0], b = r.coef[1];
              if (b == 0.0) return a > 0 ? "treat always" : "treat never";
              return "treat if " + name + (b < 0 ? " < " : " > ") + fmt(-a / b);
            }
            std::string s = "treat if ";
            for (int k = 0; k < r.features.size(); ++k) {
              const double c = r.coef[k];
              if (k > 0) s += c < 0 ? " - " : " + ";
              else if (c < 0) s += "-";
              s += fmt(std::abs(c));
              if (r.features.labels()[k] != "1") s += "*" + r.features.labels()[k];
            }
            return s + " > 0";
          },
          [](const ThresholdRule& r) -> std::string {
            return "treat if " + r.name + (r.direction == Direction::below ? " < " : " > ") +
                   fmt(r.cutoff);
          },
          [](const TreeRule& r) -> std::string {
            return "treat if causal tree contrast > 0 (" + std::to_string(r.tree->leaf_count()) +
                   " leaves)";
          },
          [](const DecisionFnRule& r) -> std::string {
            return std::string("treat if ") +
                   (r.fn->kernel() == Kernel::linear ? "linear" : "rbf") +
                   " decision function > 0 (" + std::to_string(r.fn->support().rows()) +
                   " support points)";
          },
          [](const ExpressionRule& r) -> std::string { return "treat if " + r.expr.text(); },
      },
      rule);
}

const Rule& Regime::rule(int stage) const {
  if (stage < 1 || stage > stages())
    throw ShapeError("regime has " + std::to_string(stages()) + " stages, asked for stage " +
                     std::to_string(stage));
  return rules_[stage - 1];
}

int Regime::apply(const History& h) const { return apply_rule(rule(h.stage()), h); }

ConsistencyIndex consistency_index(const Regime& regime, const Trajectory& t) {
  if (t.terminal_stage() > regime.stages())
    throw ShapeError("trajectory has more stages than the regime");
  for (int j = 1; j <= t.terminal_stage(); ++j)
    if (regime.apply(history(t, j)) != t.stages[j - 1].action) return {j};
  return {};
}

}  // namespace dtr
