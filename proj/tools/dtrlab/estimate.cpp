#include "dtrlab/estimate.hpp"

#include "dtr/ctree.hpp"
#include "dtr/error.hpp"
#include "dtr/indirect.hpp"

namespace dtrlab {
namespace {

using dtr::ConfigError;
using dtr::FeatureMap;
using dtr::Method;

std::string key(const std::string& prefix, int j) { return prefix + std::to_string(j); }

FeatureMap stage_map(const RunConfig& cfg, const std::string& prefix, int j,
                     const dtr::Schema& schema, const std::string& block,
                     bool implicit_intercept = true) {
  return FeatureMap::parse(cfg.require_string(key(prefix, j), block), schema, j,
                           implicit_intercept);
}

std::vector<dtr::StageModelSpec> linear_specs(const RunConfig& cfg, const dtr::Schema& schema,
                                              const std::string& method, bool propensity) {
  std::vector<dtr::StageModelSpec> specs;
  for (int j = 1; j <= schema.stages(); ++j) {
    dtr::StageModelSpec s;
    s.contrast = stage_map(cfg, "contrast", j, schema, "contrast formulas are required for " + method);
    s.tfree = stage_map(cfg, "tfree", j, schema,
                        "treatment-free formulas are required for " + method);
    if (propensity)
      s.propensity = stage_map(cfg, "propensity", j, schema,
                               "propensity formulas are required for " + method);
    specs.push_back(std::move(s));
  }
  return specs;
}

std::vector<FeatureMap> propensity_maps(const RunConfig& cfg, const dtr::Schema& schema,
                                        const std::string& method) {
  std::vector<FeatureMap> out;
  for (int j = 1; j <= schema.stages(); ++j)
    out.push_back(stage_map(cfg, "propensity", j, schema,
                            "propensity formulas are required for " + method));
  return out;
}

dtr::RegimeClass regime_class(const RunConfig& cfg, const dtr::Schema& schema,
                              const std::string& method) {
  const std::string block = "a regime class block ('class' with 'thresholds' or linear<j>) is "
                            "required for " + method;
  const auto family = cfg.require_string("class", block);
  if (family == "threshold") {
    const auto vars = split_list(cfg.require_string("thresholds", block));
    std::vector<dtr::Direction> dirs(vars.size(), dtr::Direction::below);
    if (cfg.has("directions")) {
      const auto d = split_list(cfg.get_string("directions", ""));
      if (d.size() != vars.size())
        throw ConfigError("'directions' needs one entry per threshold variable");
      for (std::size_t k = 0; k < d.size(); ++k) {
        if (d[k] != "below" && d[k] != "above")
          throw ConfigError("direction must be below or above, got '" + d[k] + "'");
        dirs[k] = d[k] == "below" ? dtr::Direction::below : dtr::Direction::above;
      }
    }
    auto cls = dtr::threshold_class(schema, vars, dirs);
    auto bound = [&](const std::string& k, double dtr::ThresholdSpec::*field) {
      if (!cfg.has(k)) return;
      const auto b = split_list(cfg.get_string(k, ""));
      if (b.size() != 1 && b.size() != vars.size())
        throw ConfigError("'" + k + "' needs one value or one per threshold variable");
      for (std::size_t i = 0; i < vars.size(); ++i)
        cls.thresholds[i].*field = std::stod(b[b.size() == 1 ? 0 : i]);
    };
    bound("threshold_lower", &dtr::ThresholdSpec::lower);
    bound("threshold_upper", &dtr::ThresholdSpec::upper);
    return cls;
  }
  if (family == "linear") {
    dtr::RegimeClass cls;
    cls.family = dtr::RegimeClass::Family::normalized_linear;
    cls.coef_bound = cfg.get_double("coef_bound", 1.0);
    for (int j = 1; j <= schema.stages(); ++j)
      cls.linear.push_back(stage_map(cfg, "linear", j, schema, block));
    return cls;
  }
  throw ConfigError("unknown regime class '" + family + "' (expected threshold or linear)");
}

std::vector<double> c_grid(const RunConfig& cfg) {
  if (!cfg.has("c_grid")) return dtr::OwlSpec{}.c_grid;
  const auto& v = cfg.values().at("c_grid");
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v) out.push_back(x.get<double>());
  } else {
    for (const auto& s : split_list(cfg.get_string("c_grid", ""))) out.push_back(std::stod(s));
  }
  if (out.empty()) throw ConfigError("'c_grid' is empty");
  return out;
}

}  // namespace

Estimate estimate(Method method, const dtr::Dataset& data, const RunConfig& cfg,
                  std::uint64_t seed) {
  const auto& schema = data.schema();
  const int K = schema.stages();
  const std::string name = dtr::to_string(method);
  Estimate out;
  switch (method) {
    case Method::q:
      out.fit = dtr::q_learning_fit(data, linear_specs(cfg, schema, name, false));
      break;
    case Method::a1:
    case Method::a2:
    case Method::a3:
    case Method::a4:
    case Method::dwols:
      out.fit = dtr::a_learning_fit(data, linear_specs(cfg, schema, name, true), method);
      break;
    case Method::ctree: {
      dtr::TreeHyperparams hyper;
      hyper.min_leaf = static_cast<int>(cfg.get_int("min_leaf", hyper.min_leaf));
      hyper.max_depth = static_cast<int>(cfg.get_int("max_depth", hyper.max_depth));
      hyper.honest_fraction = cfg.get_double("honest_fraction", hyper.honest_fraction);
      hyper.use_iptw = cfg.get_bool("iptw", hyper.use_iptw);
      hyper.seed = seed;
      std::vector<dtr::CtreeStageSpec> specs;
      for (int j = 1; j <= K; ++j) {
        dtr::CtreeStageSpec s;
        s.features = cfg.has(key("features", j))
                         ? stage_map(cfg, "features", j, schema, "", false)
                         : dtr::default_tree_features(schema, j);
        s.propensity = stage_map(cfg, "propensity", j, schema,
                                 "propensity formulas are required for ctree");
        s.hyper = hyper;
        specs.push_back(std::move(s));
      }
      out.fit = dtr::causal_tree_fit(data, specs);
      break;
    }
    case Method::ipwe:
    case Method::aipwe: {
      const auto cls = regime_class(cfg, schema, name);
      int clipped = 0;
      const auto props = dtr::fit_propensities(data, propensity_maps(cfg, schema, name), &clipped);
      std::optional<dtr::FitResult> q;
      if (method == Method::aipwe) q = dtr::q_learning_fit(data, linear_specs(cfg, schema, name, false));
      const dtr::PolicyEvaluator ev(data, props, q ? &*q : nullptr);
      const auto est = method == Method::ipwe ? dtr::ValueEstimator::ipwe : dtr::ValueEstimator::aipwe;
      auto search = dtr::search_optimal_regime(ev, cls, est, dtr::default_search_config(data, cls, seed));
      out.fit = dtr::direct_fit_result(search, est, props, clipped);
      out.search = std::move(search);
      break;
    }
    case Method::bowl: {
      dtr::OwlSpec spec;
      const auto kernel = cfg.require_string("kernel", "a kernel (linear or rbf) is required for bowl");
      if (kernel != "linear" && kernel != "rbf")
        throw ConfigError("kernel must be linear or rbf, got '" + kernel + "'");
      spec.kernel = kernel == "linear" ? dtr::Kernel::linear : dtr::Kernel::rbf;
      spec.gamma = cfg.get_double("gamma", 0.0);
      spec.c_grid = c_grid(cfg);
      spec.folds = static_cast<int>(cfg.get_int("folds", spec.folds));
      spec.gap_tolerance = cfg.get_double("gap_tolerance", spec.gap_tolerance);
      spec.seed = seed;
      for (int j = 1; j <= K; ++j)
        spec.features.push_back(cfg.has(key("features", j))
                                    ? stage_map(cfg, "features", j, schema, "", false)
                                    : dtr::default_tree_features(schema, j));
      int clipped = 0;
      const auto props = dtr::fit_propensities(data, propensity_maps(cfg, schema, name), &clipped);
      out.fit = dtr::bowl_fit(data, spec, props);
      if (!out.fit.stages.empty()) out.fit.stages.front().clipped = clipped;
      break;
    }
  }
  out.fit.method = method;
  return out;
}

ParameterVector parameters(const Estimate& e) {
  ParameterVector p;
  const auto& fit = e.fit;
  const bool linear_models = fit.method == Method::q || fit.method == Method::a1 ||
                             fit.method == Method::a2 || fit.method == Method::a3 ||
                             fit.method == Method::a4 || fit.method == Method::dwols;
  if (linear_models) {
    for (const auto& s : fit.stages)
      for (int k = 0; k < s.psi.size(); ++k) {
        p.names.push_back("psi" + std::to_string(s.stage) + "_" + s.contrast.labels()[k]);
        p.values.push_back(s.psi[k]);
      }
  }
  if (e.search && !e.search->regime.rules().empty() &&
      std::holds_alternative<dtr::LinearSignRule>(e.search->regime.rule(1))) {
    for (int j = 1; j <= fit.regime.stages(); ++j) {
      const auto& r = std::get<dtr::LinearSignRule>(fit.regime.rule(j));
      const std::size_t begin = p.values.size();
      for (int k = 0; k < r.coef.size(); ++k) {
        p.names.push_back("eta" + std::to_string(j) + "_" + r.features.labels()[k]);
        p.values.push_back(r.coef[k]);
      }
      p.sign_blocks.emplace_back(begin, p.values.size());
    }
  }
  for (int j = 1; j <= fit.regime.stages(); ++j)
    if (auto t = dtr::implied_threshold(fit.regime.rule(j))) {
      p.names.push_back("threshold" + std::to_string(j));
      p.values.push_back(*t);
    }
  return p;
}

RunConfig case1_fit_config() {
  return RunConfig(nlohmann::json{
      {"contrast1", "1,L1"},
      {"tfree1", "1,L1"},
      {"propensity1", "1,L1"},
      {"contrast2", "1,L2"},
      {"tfree2", "1,L1,A1,L1:A1,L2"},
      {"propensity2", "1,L2"},
      {"features1", "L1"},
      {"features2", "L2"},
      {"class", "threshold"},
      {"thresholds", "L1,L2"},
      {"directions", "below,below"},
      {"threshold_lower", "0"},
      {"kernel", "linear"},
  });
}

RunConfig case2_fit_config() {
  // Blip and treatment-free models are linear in the full stage history.
  const std::string h1 = "1,W,L11,L12";
  const std::string h2 = h1 + ",A1,L21,L22";
  const std::string h3 = h2 + ",A2,L31,L32";
  return RunConfig(nlohmann::json{
      {"contrast1", h1},
      {"tfree1", h1},
      {"propensity1", "1,W"},
      {"contrast2", h2},
      {"tfree2", h2},
      {"propensity2", "1,L21,L22"},
      {"contrast3", h3},
      {"tfree3", h3},
      {"propensity3", "1,L31"},
      {"features1", "L11,L12"},
      {"features2", "L21,L22"},
      {"features3", "L31,L32"},
      {"class", "linear"},
      {"linear1", "1,L11,L12"},
      {"linear2", "1,L21,L22"},
      {"linear3", "1,L31,L32"},
      {"kernel", "linear"},
  });
}

}  // namespace dtrlab
