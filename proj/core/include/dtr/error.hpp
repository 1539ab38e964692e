#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dtr {

/// Broad failure categories. The command-line tool maps these onto exit
/// codes (config = 2, data = 3, numerical = 4).
enum class ErrorKind { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail, int stage = 0);

  ErrorKind kind() const noexcept { return kind_; }
  /// 1-based stage the failure is attributed to, 0 when not stage specific.
  int stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  int stage_;
  std::string detail_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& detail, int stage = 0)
      : Error(ErrorKind::config, detail, stage) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& detail, int stage = 0)
      : Error(ErrorKind::data, detail, stage) {}
};

class IndexError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& detail, int stage = 0)
      : Error(ErrorKind::numerical, detail, stage) {}
};

/// Rank-deficient design or estimating-equation system.
class SingularError : public NumericalError {
 public:
  SingularError(const std::string& detail, std::vector<std::string> columns,
                int stage = 0)
      : NumericalError(detail, stage), columns_(std::move(columns)) {}

  /// Columns found to be linearly dependent on the others.
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An objective returned a non-finite value.
class EvaluationError : public NumericalError {
 public:
  EvaluationError(const std::string& detail, std::vector<double> point)
      : NumericalError(detail), point_(std::move(point)) {}

  const std::vector<double>& point() const noexcept { return point_; }

 private:
  std::vector<double> point_;
};

/// Rethrows the in-flight exception with `stage` attached, keeping its type.
/// Must be called from inside a catch block.
[[noreturn]] void rethrow_at_stage(int stage);

}  // namespace dtr
