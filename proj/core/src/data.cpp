#include "dtr/data.hpp"

#include <cmath>
#include <set>

#include "dtr/error.hpp"

namespace dtr {

Schema::Schema(std::vector<std::vector<std::string>> stage_labels)
    : labels_(std::move(stage_labels)) {
  if (labels_.empty()) throw ConfigError("schema needs at least one stage");
  std::set<std::string> seen;
  for (std::size_t j = 0; j < labels_.size(); ++j) {
    for (const auto& name : labels_[j]) {
      if (name.empty()) throw ConfigError("empty covariate label", static_cast<int>(j) + 1);
      if (name == "Y" || parse_action_label(name) > 0)
        throw ConfigError("covariate label '" + name + "' is reserved", static_cast<int>(j) + 1);
      if (!seen.insert(name).second)
        throw ConfigError("duplicate covariate label '" + name + "'");
    }
  }
}

int Schema::dim(int stage) const { return static_cast<int>(labels(stage).size()); }

const std::vector<std::string>& Schema::labels(int stage) const {
  if (stage < 1 || stage > stages())
    throw IndexError("stage " + std::to_string(stage) + " outside 1.." + std::to_string(stages()));
  return labels_[stage - 1];
}

std::optional<VariableRef> Schema::find(const std::string& name) const {
  for (std::size_t j = 0; j < labels_.size(); ++j)
    for (std::size_t i = 0; i < labels_[j].size(); ++i)
      if (labels_[j][i] == name) return VariableRef{static_cast<int>(j) + 1, static_cast<int>(i)};
  return std::nullopt;
}

std::string Schema::action_label(int stage) { return "A" + std::to_string(stage); }

int Schema::parse_action_label(const std::string& name) {
  if (name.size() < 2 || name[0] != 'A') return 0;
  int k = 0;
  for (std::size_t i = 1; i < name.size(); ++i) {
    if (name[i] < '0' || name[i] > '9') return 0;
    k = k * 10 + (name[i] - '0');
    if (k > 1000000) return 0;
  }
  return k;
}

History::History(int stage, std::span<const StageObs> observed)
    : stage_(stage), obs_(observed) {
  if (stage < 1 || static_cast<std::size_t>(stage) > observed.size())
    throw IndexError("history stage " + std::to_string(stage) + " not available");
}

std::span<const double> History::covariates(int k) const {
  if (k < 1 || k > stage_)
    throw IndexError("covariates of stage " + std::to_string(k) +
                     " are not part of the stage-" + std::to_string(stage_) + " history");
  return obs_[k - 1].covariates;
}

double History::covariate(int k, int index) const {
  auto c = covariates(k);
  if (index < 0 || static_cast<std::size_t>(index) >= c.size())
    throw ShapeError("covariate " + std::to_string(index) + " of stage " + std::to_string(k) +
                     " is not available");
  return c[index];
}

int History::action(int k) const {
  if (k < 1 || k >= stage_)
    throw IndexError("action of stage " + std::to_string(k) +
                     " is not part of the stage-" + std::to_string(stage_) + " history");
  return obs_[k - 1].action;
}

History history(const Trajectory& t, int j) {
  if (j < 1 || j > t.terminal_stage())
    throw IndexError("stage " + std::to_string(j) + " outside 1.." +
                     std::to_string(t.terminal_stage()));
  return History(j, std::span<const StageObs>(t.stages.data(), static_cast<std::size_t>(j)));
}

Dataset::Dataset(Schema schema, std::vector<Trajectory> trajectories)
    : schema_(std::move(schema)), rows_(std::move(trajectories)) {
  if (rows_.empty()) throw DataError("dataset has no trajectories");
  const int K = schema_.stages();
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& t = rows_[i];
    const std::string row = "row " + std::to_string(i + 1) + ": ";
    if (t.stages.empty() || t.terminal_stage() > K)
      throw ShapeError(row + "has " + std::to_string(t.stages.size()) + " stages, expected 1.." +
                       std::to_string(K));
    if (!std::isfinite(t.outcome)) throw DataError(row + "outcome is not finite");
    for (int j = 1; j <= t.terminal_stage(); ++j) {
      const auto& s = t.stages[j - 1];
      if (static_cast<int>(s.covariates.size()) != schema_.dim(j))
        throw ShapeError(row + "wrong covariate count", j);
      for (double v : s.covariates)
        if (!std::isfinite(v)) throw DataError(row + "covariate is not finite", j);
      if (s.action != 0 && s.action != 1)
        throw DataError(row + "action " + std::to_string(s.action) + " is not binary", j);
    }
  }
}

std::vector<std::size_t> Dataset::reaching(int stage) const {
  std::vector<std::size_t> out;
  out.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (rows_[i].terminal_stage() >= stage) out.push_back(i);
  return out;
}

bool Dataset::complete() const {
  for (const auto& t : rows_)
    if (t.terminal_stage() != stages()) return false;
  return true;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  std::vector<Trajectory> picked;
  picked.reserve(rows.size());
  for (auto r : rows) {
    if (r >= rows_.size()) throw IndexError("row " + std::to_string(r) + " out of range");
    picked.push_back(rows_[r]);
  }
  return Dataset(schema_, std::move(picked));
}

std::vector<double> Dataset::outcomes() const {
  std::vector<double> y;
  y.reserve(rows_.size());
  for (const auto& t : rows_) y.push_back(t.outcome);
  return y;
}

}  // namespace dtr
