#pragma once

#include <memory>
#include <string>

#include "dtr/data.hpp"

namespace dtr {

/// Arithmetic/boolean expression over history variables, compiled against a
/// schema for a fixed stage.
///
/// Grammar: numbers, covariate names visible at the stage, earlier actions
/// (A1, ...), `A` for the current action when allowed, operators
/// `|| && ! < <= > >= == != + - * / ^`, the words `or`/`and`, and the
/// functions exp, log, sqrt, abs, expit, min, max, pow, I. Comparisons and
/// logical operators yield 0 or 1.
class Expression {
 public:
  Expression() = default;
  static Expression compile(const std::string& text, const Schema& schema, int stage,
                            bool allow_current_action = false);

  /// `action` is the value bound to `A`; ignored unless the expression
  /// refers to it.
  double operator()(const History& h, int action = 0) const;

  const std::string& text() const noexcept { return text_; }
  int stage() const noexcept { return stage_; }
  bool valid() const noexcept { return root_ != nullptr; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
  int stage_ = 0;
};

}  // namespace dtr
