#pragma once

#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dtr/error.hpp"

namespace dtrlab {

/// Exit status for an error kind: 2 config, 3 data, 4 numerical.
int exit_code(const dtr::Error& e);

struct SimulateArgs {
  std::string case_name;  // case1 or case2; ignored when spec_file is set
  std::string spec_file;
  std::size_t n = 0;
  std::optional<std::uint64_t> seed;
  std::string out;  // empty writes to the output stream
};

struct FitArgs {
  std::string method;
  std::string data;
  bool long_format = false;
  std::string config;
  std::vector<std::string> sets;
  int bootstrap = 0;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string report;      // JSON report path
  std::string regime_out;  // fitted regime as a regime file
};

struct EvaluateArgs {
  std::string regime;
  std::string case_name;
  std::string spec_file;
  long draws = 10000;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string report;
};

struct AccuracyArgs {
  std::string regime;
  std::string case_name;
  std::string spec_file;
  std::size_t n_test = 1000;
  std::optional<std::uint64_t> seed;
  std::string report;
};

struct BenchmarkArgs {
  std::string suite = "case1";
  int replications = 200;
  std::string sizes = "1000";
  std::string methods = "q,a3";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::size_t n_test = 1000;
  long mc_draws = 0;
  std::string config;
  std::vector<std::string> sets;
  std::string out;  // output directory; empty skips the files
};

// Each command writes its human-readable output to `out`, notes to `log`,
// and returns the JSON report.
nlohmann::json cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& log);
nlohmann::json cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& log);
nlohmann::json cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& log);
nlohmann::json cmd_accuracy(const AccuracyArgs& args, std::ostream& out, std::ostream& log);
nlohmann::json cmd_benchmark(const BenchmarkArgs& args, std::ostream& out, std::ostream& log);

}  // namespace dtrlab
