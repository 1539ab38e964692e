#include "dtrlab/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dtr/io.hpp"
#include "dtr/rng.hpp"
#include "dtr/simlab.hpp"
#include "dtrlab/estimate.hpp"
#include "dtrlab/suite.hpp"

namespace dtrlab {
namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";
constexpr const char* kRng = "xoshiro256** seeded through splitmix64; streams derived per row/replicate";

json report_header(const std::string& command, const SeedChoice& seed, const json& resolved) {
  return {{"tool", "dtrlab"},
          {"version", kVersion},
          {"command", command},
          {"seed", seed.seed},
          {"seed_source", seed.source},
          {"rng", kRng},
          {"config_hash", fnv1a_hex(resolved.dump())},
          {"config", resolved}};
}

void log_seed(const SeedChoice& s, std::ostream& log) {
  if (s.source != "flag") log << "seed " << s.seed << " (from " << s.source << ")\n";
}

void write_json(const std::string& path, const json& j) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw dtr::DataError("cannot write '" + path + "'");
  f << j.dump(2) << '\n';
}

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

struct Dgp {
  dtr::DgpSpec spec;
  bool builtin = false;
};

Dgp load_dgp(const std::string& case_name, const std::string& spec_file) {
  if (!spec_file.empty()) {
    json j;
    try {
      j = json::parse(dtr::read_text_file(spec_file));
    } catch (const json::parse_error& e) {
      throw dtr::ConfigError(spec_file + ": " + e.what());
    } catch (const dtr::DataError& e) {
      throw dtr::ConfigError(e.detail());
    }
    return {dtr::dgp_from_json(j), false};
  }
  if (case_name == "case1") return {dtr::case1_spec(), true};
  if (case_name == "case2") return {dtr::case2_spec(), true};
  throw dtr::ConfigError("unknown case '" + case_name + "' (expected case1, case2 or --spec)");
}

dtr::Dataset draw(const Dgp& dgp, std::size_t n, std::uint64_t seed) {
  if (dgp.builtin)
    return dgp.spec.name == "case1" ? dtr::generate_case1(n, seed) : dtr::generate_case2(n, seed);
  return dtr::generate_from_spec(dgp.spec, n, seed);
}

dtr::Regime load_regime(const std::string& path, const dtr::Schema& schema) {
  json j;
  try {
    j = json::parse(dtr::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw dtr::ConfigError(path + ": " + e.what());
  } catch (const dtr::DataError& e) {
    throw dtr::ConfigError(e.detail());
  }
  return dtr::regime_from_json(j, schema);
}

json labelled(const std::vector<std::string>& labels, const Eigen::VectorXd& v) {
  json o = json::object();
  for (int k = 0; k < v.size() && k < static_cast<int>(labels.size()); ++k) o[labels[k]] = v[k];
  return o;
}

json stage_report(const dtr::StageFit& s, const dtr::Rule& rule) {
  json j = {{"stage", s.stage}, {"rows", s.rows}, {"rule", dtr::describe(rule)},
            {"clipped", s.clipped}};
  if (auto t = dtr::implied_threshold(rule)) j["threshold"] = *t;
  if (s.psi.size() > 0) j["psi"] = labelled(s.contrast.labels(), s.psi);
  if (s.xi.size() > 0) j["xi"] = labelled(s.tfree.labels(), s.xi);
  if (s.propensity && s.alpha.size() > 0)
    j["propensity"] = labelled(s.propensity->features().labels(), s.alpha);
  if (s.condition > 0) j["condition"] = s.condition;
  if (s.ee_residual > 0) j["ee_residual"] = s.ee_residual;
  if (s.tree) {
    j["tree"] = s.tree->to_json();
    j["leaves"] = s.tree->leaf_count();
  }
  if (std::isfinite(s.tuning)) j["tuning"] = s.tuning;
  if (std::isfinite(s.objective)) j["objective"] = s.objective;
  if (std::isfinite(s.zero_objective)) j["zero_objective"] = s.zero_objective;
  return j;
}

void print_coefs(std::ostream& out, const char* name, const std::vector<std::string>& labels,
                 const Eigen::VectorXd& v, const std::vector<double>* se, std::size_t se_offset) {
  if (v.size() == 0) return;
  out << "  " << name << ":";
  for (int k = 0; k < v.size(); ++k) {
    out << "  " << labels[k] << " = " << dtr::format_double(v[k]);
    if (se) out << " (se " << std::setprecision(4) << (*se)[se_offset + k] << std::setprecision(6) << ")";
  }
  out << "\n";
}

}  // namespace

int exit_code(const dtr::Error& e) {
  switch (e.kind()) {
    case dtr::ErrorKind::config: return 2;
    case dtr::ErrorKind::data: return 3;
    default: return 4;
  }
}

json cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& log) {
  if (args.n < 1) throw dtr::ConfigError("--n must be at least 1");
  const auto seed = resolve_seed(args.seed);
  log_seed(seed, log);
  const Dgp dgp = load_dgp(args.case_name, args.spec_file);
  const auto data = draw(dgp, args.n, seed.seed);
  if (args.out.empty()) dtr::write_csv(out, data);
  else dtr::save_dataset(args.out, data);
  const json resolved = {{"case", args.spec_file.empty() ? args.case_name : args.spec_file},
                         {"n", args.n}, {"seed", seed.seed}};
  json r = report_header("simulate", seed, resolved);
  r["method"] = nullptr;
  r["rows"] = data.size();
  r["clipped"] = 0;
  return r;
}

json cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& log) {
  const auto method = dtr::parse_method(args.method);
  if (args.data.empty()) throw dtr::ConfigError("--data is required");
  RunConfig cfg = args.config.empty() ? RunConfig() : RunConfig::from_file(args.config);
  for (const auto& s : args.sets) cfg.set(s);
  const auto seed = resolve_seed(args.seed);
  log_seed(seed, log);
  const auto data = dtr::load_dataset(args.data, args.long_format);
  if (args.bootstrap < 0 || args.bootstrap == 1)
    throw dtr::ConfigError("--bootstrap needs at least 2 replicates");

  const Estimate est = estimate(method, data, cfg, seed.seed);
  const auto& fit = est.fit;

  const json resolved = {{"method", args.method}, {"data", args.data},
                         {"long", args.long_format}, {"bootstrap", args.bootstrap},
                         {"seed", seed.seed}, {"spec", cfg.values()}};
  json r = report_header("fit", seed, resolved);
  r["method"] = dtr::to_string(method);
  r["n"] = data.size();
  r["stages"] = json::array();
  for (const auto& s : fit.stages) r["stages"].push_back(stage_report(s, fit.regime.rule(s.stage)));
  r["regime"] = dtr::regime_to_json(fit.regime);
  r["value_means"] = fit.mean_values;
  r["propensity_clip"] = fit.clip;
  r["clipped"] = fit.clipped_total();
  r["warnings"] = fit.warnings;
  if (est.search) {
    r["value_estimate"] = {{"estimator", dtr::to_string(est.search->value.estimator)},
                           {"value", est.search->value.value},
                           {"consistent", est.search->value.consistent},
                           {"augmentation", est.search->value.augmentation},
                           {"evaluations", est.search->evaluations}};
  }

  const auto point = parameters(est);
  std::optional<std::vector<double>> se;
  if (args.bootstrap >= 2) {
    if (method == dtr::Method::ctree || method == dtr::Method::bowl)
      throw dtr::ConfigError("bootstrap standard errors are available for linear-model and "
                             "direct-search methods only");
    const std::uint64_t fit_seed = seed.seed;
    dtr::BootstrapOptions opts;
    opts.jobs = args.jobs;
    opts.sign_blocks = point.sign_blocks;
    auto boot = dtr::bootstrap_se(
        [&](const dtr::Dataset& d) {
          auto p = parameters(estimate(method, d, cfg, fit_seed));
          if (p.names != point.names)
            throw dtr::ShapeError("replicate produced a different parameter set");
          return p.values;
        },
        data, args.bootstrap, dtr::derive_seed(seed.seed, 0xB007), opts);
    se = boot.se;
    json b = {{"replicates", boot.replicates},
              {"failures", boot.failures},
              {"method", "nonparametric bootstrap over trajectories (no sandwich variance)"},
              {"sign_aligned", !point.sign_blocks.empty()},
              {"se", json::object()}};
    for (std::size_t k = 0; k < point.names.size(); ++k) b["se"][point.names[k]] = boot.se[k];
    r["bootstrap"] = b;
  }
  r["parameters"] = json::object();
  for (std::size_t k = 0; k < point.names.size(); ++k) r["parameters"][point.names[k]] = point.values[k];

  out << "method " << dtr::to_string(method) << ", n = " << data.size() << ", seed " << seed.seed
      << ", config " << r["config_hash"].get<std::string>() << "\n";
  std::size_t offset = 0;
  for (const auto& s : fit.stages) {
    out << "stage " << s.stage << " (" << s.rows << " rows): "
        << dtr::describe(fit.regime.rule(s.stage)) << "\n";
    const std::vector<double>* sep = se ? &*se : nullptr;
    print_coefs(out, "psi", s.contrast.labels(), s.psi, sep, offset);
    offset += static_cast<std::size_t>(s.psi.size());
    print_coefs(out, "xi", s.tfree.labels(), s.xi, nullptr, 0);
    if (s.tree) out << s.tree->to_text();
  }
  if (!fit.mean_values.empty()) {
    out << "value column means:";
    for (double v : fit.mean_values) out << " " << dtr::format_double(v);
    out << "\n";
  }
  if (est.search)
    out << dtr::to_string(est.search->value.estimator) << " value " << est.search->value.value
        << " (" << est.search->value.consistent << " consistent trajectories)\n";
  if (se) {
    out << "bootstrap SEs:";
    for (std::size_t k = 0; k < point.names.size(); ++k)
      out << "  " << point.names[k] << " " << dtr::format_double((*se)[k]);
    out << "\n";
  }
  out << "propensities clipped: " << fit.clipped_total() << "\n";
  for (const auto& w : fit.warnings) log << "warning: " << w << "\n";

  write_json(args.report, r);
  if (!args.regime_out.empty()) write_json(args.regime_out, r["regime"]);
  return r;
}

json cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& log) {
  if (args.draws < 1) throw dtr::ConfigError("--draws must be at least 1");
  const auto seed = resolve_seed(args.seed);
  log_seed(seed, log);
  const Dgp dgp = load_dgp(args.case_name, args.spec_file);
  const auto regime = load_regime(args.regime, dgp.spec.schema());
  const auto rep = dtr::mc_value(regime, dgp.spec, args.draws, seed.seed, args.jobs,
                                 fnv1a_hex(dtr::regime_to_json(regime).dump()));
  const json resolved = {{"regime", args.regime}, {"case", args.spec_file.empty() ? args.case_name : args.spec_file},
                         {"draws", args.draws}, {"seed", seed.seed}};
  json r = report_header("evaluate", seed, resolved);
  r["method"] = "mc_value";
  r["clipped"] = 0;
  r["value"] = rep.value;
  r["se"] = rep.se;
  r["draws"] = rep.draws;
  r["regime_id"] = rep.regime_id;
  out << "value " << dtr::format_double(rep.value) << " (se " << dtr::format_double(rep.se)
      << ", " << rep.draws << " draws, regime " << rep.regime_id << ")\n";
  write_json(args.report, r);
  return r;
}

json cmd_accuracy(const AccuracyArgs& args, std::ostream& out, std::ostream& log) {
  if (args.n_test < 1) throw dtr::ConfigError("--n-test must be at least 1");
  const auto seed = resolve_seed(args.seed);
  log_seed(seed, log);
  const Dgp dgp = load_dgp(args.case_name, args.spec_file);
  const auto regime = load_regime(args.regime, dgp.spec.schema());
  const auto test = draw(dgp, args.n_test, seed.seed);
  const auto rep = dtr::decision_accuracy(regime, dgp.spec.oracle, test);
  const json resolved = {{"regime", args.regime}, {"case", args.spec_file.empty() ? args.case_name : args.spec_file},
                         {"n_test", args.n_test}, {"seed", seed.seed}};
  json r = report_header("accuracy", seed, resolved);
  r["method"] = "decision_accuracy";
  r["clipped"] = 0;
  r["stage_accuracy"] = rep.stage;
  r["accuracy"] = rep.overall;
  r["test_size"] = rep.test_size;
  for (std::size_t j = 0; j < rep.stage.size(); ++j)
    out << "accu" << j + 1 << " " << std::fixed << std::setprecision(2) << 100 * rep.stage[j] << "%  ";
  out << "accu " << 100 * rep.overall << "%  (n_test " << rep.test_size << ")\n" << std::defaultfloat;
  write_json(args.report, r);
  return r;
}

json cmd_benchmark(const BenchmarkArgs& args, std::ostream& out, std::ostream& log) {
  const auto seed = resolve_seed(args.seed);
  log_seed(seed, log);
  SuiteOptions o;
  o.suite = args.suite;
  o.replications = args.replications;
  o.sizes.clear();
  for (const auto& s : split_list(args.sizes)) {
    std::size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || v < 1) throw dtr::ConfigError("bad sample size '" + s + "'");
    o.sizes.push_back(static_cast<std::size_t>(v));
  }
  for (const auto& m : split_list(args.methods)) o.methods.push_back(dtr::parse_method(m));
  o.seed = seed.seed;
  o.jobs = args.jobs;
  o.n_test = args.n_test;
  o.mc_draws = args.mc_draws;
  if (!args.config.empty()) o.overrides = RunConfig::from_file(args.config);
  for (const auto& s : args.sets) o.overrides.set(s);

  const auto result = run_suite(o);
  if (!args.out.empty()) write_suite(result, args.out);
  out << render_suite(result);

  // jobs does not affect results, so it stays out of the hashed config.
  const json resolved = {{"suite", o.suite}, {"replications", o.replications},
                         {"sizes", o.sizes}, {"methods", args.methods}, {"n_test", o.n_test},
                         {"mc_draws", o.mc_draws}, {"seed", o.seed},
                         {"spec", result.config.values()}};
  json r = report_header("benchmark", seed, resolved);
  r["method"] = args.methods;
  r["rows"] = json::array();
  for (const auto& s : result.rows) {
    json row = {{"method", dtr::to_string(s.method)}, {"n", s.n}, {"succeeded", s.succeeded},
                {"failed", s.failed}, {"clipped", s.clipped},
                {"accuracy_mean", num(s.overall_mean)}, {"accuracy_sd", num(s.overall_sd)},
                {"value_mean", num(s.value_mean)}, {"value_sd", num(s.value_sd)},
                {"parameters", json::object()}};
    for (std::size_t k = 0; k < s.names.size(); ++k)
      row["parameters"][s.names[k]] = {{"mean", num(s.mean[k])}, {"sd", num(s.sd[k])},
                                       {"truth", num(s.truth[k])}};
    r["rows"].push_back(row);
  }
  long clipped = 0;
  for (const auto& s : result.rows) clipped += s.clipped;
  r["clipped"] = clipped;
  if (!args.out.empty()) write_json(args.out + "/report.json", r);
  return r;
}

}  // namespace dtrlab
