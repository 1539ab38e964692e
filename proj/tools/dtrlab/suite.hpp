#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dtr/fit.hpp"
#include "dtr/simlab.hpp"
#include "dtrlab/config.hpp"

namespace dtrlab {

struct SuiteOptions {
  std::string suite = "case1";  // case1 or case2
  int replications = 200;
  std::vector<std::size_t> sizes = {1000};
  std::vector<dtr::Method> methods;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::size_t n_test = 1000;  // 0 skips decision accuracy
  long mc_draws = 0;          // 0 skips Monte Carlo value
  RunConfig overrides;        // merged over the suite's fit formulas
};

struct ReplicateRecord {
  bool ok = false;
  std::string error;
  std::vector<std::string> names;
  std::vector<double> params;
  dtr::AccuracyReport accuracy;
  double value = std::numeric_limits<double>::quiet_NaN();
  int clipped = 0;
};

struct MethodSummary {
  dtr::Method method = dtr::Method::q;
  std::size_t n = 0;
  std::vector<std::string> names;
  std::vector<double> truth, mean, sd;
  std::vector<int> count;
  std::vector<double> accuracy_mean, accuracy_sd;  // per stage, percent
  double overall_mean = std::numeric_limits<double>::quiet_NaN();
  double overall_sd = std::numeric_limits<double>::quiet_NaN();
  double value_mean = std::numeric_limits<double>::quiet_NaN();
  double value_sd = std::numeric_limits<double>::quiet_NaN();
  int succeeded = 0;
  int failed = 0;
  long clipped = 0;
  std::vector<ReplicateRecord> replicates;

  /// Index of a named parameter, or -1.
  int find(const std::string& name) const;
};

struct SuiteResult {
  SuiteOptions options;
  RunConfig config;
  std::vector<MethodSummary> rows;

  const MethodSummary& row(dtr::Method m, std::size_t n) const;
};

/// Replications of train / fit / score. Replicate r of size n draws its data
/// from seeds derived from (seed, size index, r), so results do not depend
/// on `jobs`. More than 20% failed replicates for any method raises
/// NumericalError.
SuiteResult run_suite(const SuiteOptions& options);

/// estimates.csv, accuracy.csv, value.csv, replicates.csv and summary.txt.
void write_suite(const SuiteResult& result, const std::string& dir);
std::string render_suite(const SuiteResult& result);

}  // namespace dtrlab
