#include "dtr/features.hpp"

#include <algorithm>
#include <cctype>

#include "dtr/error.hpp"

namespace dtr {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits on `sep` outside braces and parentheses.
std::vector<std::string> split_top(const std::string& s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '{' || c == '(') ++depth;
    if (c == '}' || c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

FeatureMap FeatureMap::parse(const std::string& formula, const Schema& schema, int stage,
                             bool implicit_intercept) {
  if (stage < 1 || stage > schema.stages())
    throw ConfigError("feature formula '" + formula + "' refers to a stage outside the schema",
                      stage);
  FeatureMap m;
  m.stage_ = stage;
  m.formula_ = trim(formula);
  if (m.formula_.empty() || m.formula_ == "none") return m;

  bool intercept = implicit_intercept;
  std::vector<std::pair<Term, std::string>> terms;
  for (const auto& raw : split_top(m.formula_, ',')) {
    if (raw.empty()) throw ConfigError("empty term in formula '" + formula + "'", stage);
    if (raw == "1") {
      intercept = true;
      continue;
    }
    if (raw == "0" || raw == "-1") {
      intercept = false;
      continue;
    }
    Term term;
    for (const auto& f : split_top(raw, ':')) {
      Factor factor{};
      if (f.size() >= 2 && f.front() == '{' && f.back() == '}') {
        factor.kind = Factor::Kind::expression;
        factor.expr = Expression::compile(f.substr(1, f.size() - 2), schema, stage);
      } else if (int k = Schema::parse_action_label(f); k > 0) {
        if (k >= stage)
          throw ConfigError("formula '" + formula + "' uses " + f +
                                ", which is not part of the stage-" + std::to_string(stage) +
                                " history",
                            stage);
        factor.kind = Factor::Kind::action;
        factor.action_stage = k;
      } else {
        auto ref = schema.find(f);
        if (!ref) throw ConfigError("formula '" + formula + "': unknown column '" + f + "'", stage);
        if (ref->stage > stage)
          throw ConfigError("formula '" + formula + "' uses " + f + ", observed after stage " +
                                std::to_string(stage),
                            stage);
        factor.kind = Factor::Kind::covariate;
        factor.ref = *ref;
      }
      term.push_back(std::move(factor));
    }
    terms.emplace_back(std::move(term), raw);
  }
  if (intercept) {
    m.terms_.push_back({});
    m.labels_.push_back("1");
  }
  for (auto& [t, label] : terms) {
    if (std::find(m.labels_.begin(), m.labels_.end(), label) != m.labels_.end())
      throw ConfigError("formula '" + formula + "' repeats term '" + label + "'", stage);
    m.terms_.push_back(std::move(t));
    m.labels_.push_back(label);
  }
  return m;
}

FeatureMap FeatureMap::intercept_and(const std::string& name, const Schema& schema, int stage) {
  return parse("1," + name, schema, stage);
}

void FeatureMap::evaluate(const History& h, double* out) const {
  if (h.stage() != stage_)
    throw ShapeError("feature map for stage " + std::to_string(stage_) +
                     " applied to a stage-" + std::to_string(h.stage()) + " history");
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    double v = 1.0;
    for (const auto& f : terms_[t]) {
      switch (f.kind) {
        case Factor::Kind::covariate:
          v *= h.covariate(f.ref.stage, f.ref.index);
          break;
        case Factor::Kind::action:
          v *= h.action(f.action_stage);
          break;
        case Factor::Kind::expression:
          v *= f.expr(h);
          break;
      }
    }
    out[t] = v;
  }
}

Eigen::VectorXd FeatureMap::operator()(const History& h) const {
  Eigen::VectorXd v(size());
  evaluate(h, v.data());
  return v;
}

std::optional<VariableRef> FeatureMap::intercept_slope() const {
  if (terms_.size() != 2 || !terms_[0].empty() || terms_[1].size() != 1) return std::nullopt;
  if (terms_[1][0].kind != Factor::Kind::covariate) return std::nullopt;
  return terms_[1][0].ref;
}

Eigen::MatrixXd design(const FeatureMap& map, const Dataset& data,
                       const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), map.size());
  Eigen::VectorXd buf(map.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    map.evaluate(history(data[rows[r]], map.stage()), buf.data());
    X.row(static_cast<Eigen::Index>(r)) = buf.transpose();
  }
  return X;
}

}  // namespace dtr
