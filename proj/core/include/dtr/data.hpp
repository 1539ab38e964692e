#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dtr {

/// Location of a named covariate: 1-based stage and 0-based position.
struct VariableRef {
  int stage = 0;
  int index = 0;
};

/// Per-stage covariate labels. Labels must be unique across stages; `Y` and
/// action names (`A1`, `A2`, ...) are reserved.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<std::vector<std::string>> stage_labels);

  int stages() const noexcept { return static_cast<int>(labels_.size()); }
  int dim(int stage) const;
  const std::vector<std::string>& labels(int stage) const;
  std::optional<VariableRef> find(const std::string& name) const;
  static std::string action_label(int stage);
  /// Stage number for an action label such as "A2", or 0.
  static int parse_action_label(const std::string& name);

  bool operator==(const Schema&) const = default;

 private:
  std::vector<std::vector<std::string>> labels_;
};

struct StageObs {
  std::vector<double> covariates;
  int action = 0;
};

/// One individual's record. Individuals that left the study early carry
/// fewer stages than the dataset; the outcome is whatever was observed last.
struct Trajectory {
  std::vector<StageObs> stages;
  double outcome = 0.0;

  int terminal_stage() const noexcept { return static_cast<int>(stages.size()); }
};

/// Non-owning view of (covariates of stages 1..j, actions of stages 1..j-1).
/// The stage-j action is deliberately not visible.
class History {
 public:
  History(int stage, std::span<const StageObs> observed);

  int stage() const noexcept { return stage_; }
  std::span<const double> covariates(int k) const;
  double covariate(int k, int index) const;
  int action(int k) const;

 private:
  int stage_;
  std::span<const StageObs> obs_;
};

/// Prefix of `t` up to stage j. Throws IndexError outside 1..stages.
History history(const Trajectory& t, int j);

class Dataset {
 public:
  Dataset() = default;
  /// Validates binary actions, finite values and stage dimensions.
  Dataset(Schema schema, std::vector<Trajectory> trajectories);

  const Schema& schema() const noexcept { return schema_; }
  int stages() const noexcept { return schema_.stages(); }
  std::size_t size() const noexcept { return rows_.size(); }
  const Trajectory& operator[](std::size_t i) const { return rows_[i]; }
  const std::vector<Trajectory>& trajectories() const noexcept { return rows_; }

  /// Row indices of trajectories that reached `stage`.
  std::vector<std::size_t> reaching(int stage) const;
  bool complete() const;
  /// Rows in the given order; repeats allowed (bootstrap resampling).
  Dataset subset(const std::vector<std::size_t>& rows) const;
  std::vector<double> outcomes() const;

 private:
  Schema schema_;
  std::vector<Trajectory> rows_;
};

}  // namespace dtr
