#pragma once

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>

#include "dtr/data.hpp"
#include "dtr/regime.hpp"
#include "dtr/simlab.hpp"

namespace dtr {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

/// Wide CSV: one row per trajectory, columns <stage-1 covariates>, A1,
/// <stage-2 covariates>, A2, ..., Y. Covariates belong to the stage of the
/// next action column. Empty (or NA) cells from some stage onward mark an
/// early-terminated trajectory.
Dataset read_csv(std::istream& in);
void write_csv(std::ostream& out, const Dataset& data);

/// Long CSV: one row per person-stage with columns id, stage, A, Y and
/// covariates. A covariate column used at several stages becomes one label
/// per stage (`name_stage`). Y may be repeated or given on one row only.
Dataset read_long_csv(std::istream& in);

Dataset load_dataset(const std::string& path, bool long_format = false);
void save_dataset(const std::string& path, const Dataset& data);

std::string read_text_file(const std::string& path);

/// Regime files: {"stages": [rule, ...]} where each rule has a "type" of
/// linear, threshold, tree, decision_function or expression.
nlohmann::json regime_to_json(const Regime& regime);
Regime regime_from_json(const nlohmann::json& j, const Schema& schema);
nlohmann::json rule_to_json(const Rule& rule);
Rule rule_from_json(const nlohmann::json& j, const Schema& schema, int stage);

/// DGP config: {"name", "mu0", "outcome_sd", "stages": [{"covariates":
/// [{"name", "mean", "sd", "lower", "upper"}], "propensity", "regret",
/// "mean_zero", "oracle"}]}. Functions are expressions over the history;
/// "regret" may use `A` for the current action; "oracle" is an expression
/// (treat when positive) or a rule object.
DgpSpec dgp_from_json(const nlohmann::json& j);

}  // namespace dtr
