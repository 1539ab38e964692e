#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtr/data.hpp"
#include "dtr/direct.hpp"
#include "dtr/fit.hpp"
#include "dtrlab/config.hpp"

namespace dtrlab {

/// Stage specs are read from keys suffixed by the stage number:
/// contrast<j>, tfree<j>, propensity<j> (formulas) and features<j>
/// (tree / OWL inputs). Direct search reads `class` (threshold or linear),
/// `thresholds`, `directions`, linear<j> and `coef_bound`.
struct Estimate {
  dtr::FitResult fit;
  std::optional<dtr::SearchResult> search;
};

Estimate estimate(dtr::Method method, const dtr::Dataset& data, const RunConfig& cfg,
                  std::uint64_t seed);

/// Named scalar summary of a fit used by the bootstrap and benchmark tables:
/// stage coefficients psi<j>_<term>, implied thresholds, and normalized
/// direct-search coefficients.
struct ParameterVector {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<std::pair<std::size_t, std::size_t>> sign_blocks;
};

ParameterVector parameters(const Estimate& e);

/// Formulas for the two built-in simulation designs.
RunConfig case1_fit_config();
RunConfig case2_fit_config();

}  // namespace dtrlab
