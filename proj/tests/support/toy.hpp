#pragma once

#include <string>
#include <vector>

#include "dtr/data.hpp"

namespace toy {

/// Dataset from wide rows laid out as stage-1 covariates, A1, stage-2
/// covariates, A2, ..., Y.
inline dtr::Dataset wide(const std::vector<std::vector<std::string>>& labels,
                         const std::vector<std::vector<double>>& rows) {
  std::vector<dtr::Trajectory> ts;
  for (const auto& row : rows) {
    dtr::Trajectory t;
    std::size_t c = 0;
    for (const auto& stage : labels) {
      dtr::StageObs s;
      for (std::size_t k = 0; k < stage.size(); ++k) s.covariates.push_back(row.at(c++));
      s.action = static_cast<int>(row.at(c++));
      t.stages.push_back(s);
    }
    t.outcome = row.at(c);
    ts.push_back(t);
  }
  return dtr::Dataset(dtr::Schema(labels), ts);
}

}  // namespace toy
