#include <CLI11.hpp>
#include <iostream>

#include "dtr/fit.hpp"
#include "dtrlab/commands.hpp"

namespace {

void seed_option(CLI::App* cmd, std::optional<std::uint64_t>& seed) {
  cmd->add_option("--seed", seed, "Random seed (default: DTRLAB_SEED, then 1)");
}

std::string method_list() {
  std::string s;
  for (const auto& m : dtr::method_names()) s += (s.empty() ? "" : "|") + m;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dtrlab: estimate and benchmark dynamic treatment regimes"};
  app.require_subcommand(1);

  dtrlab::SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a wide-format CSV dataset");
  simulate->add_option("--case", sim.case_name, "Built-in design: case1 or case2")->default_val("case1");
  simulate->add_option("--spec", sim.spec_file, "DGP config file (JSON)");
  simulate->add_option("--n", sim.n, "Number of trajectories")->required();
  seed_option(simulate, sim.seed);
  simulate->add_option("--out", sim.out, "Output CSV (default: stdout)");

  dtrlab::FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Estimate a regime from data");
  fitc->add_option("--method", fit.method, method_list())->required();
  fitc->add_option("--data", fit.data, "Input CSV")->required();
  fitc->add_flag("--long", fit.long_format, "Input is long format (id, stage, A, Y, ...)");
  fitc->add_option("--config", fit.config, "Model formula file (JSON)");
  fitc->add_option("--set", fit.sets, "Override a model key, e.g. contrast2=1,L2");
  fitc->add_option("--bootstrap", fit.bootstrap, "Bootstrap replicates for standard errors");
  seed_option(fitc, fit.seed);
  fitc->add_option("--jobs", fit.jobs, "Worker threads")->default_val(1);
  fitc->add_option("--report", fit.report, "Write the JSON report here");
  fitc->add_option("--regime-out", fit.regime_out, "Write the fitted regime file here");

  dtrlab::EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo value of a regime file");
  evaluate->add_option("--regime", ev.regime, "Regime file (JSON)")->required();
  evaluate->add_option("--case", ev.case_name, "case1 or case2")->default_val("case1");
  evaluate->add_option("--spec", ev.spec_file, "DGP config file (JSON)");
  evaluate->add_option("--draws", ev.draws, "Monte Carlo draws")->default_val(10000);
  seed_option(evaluate, ev.seed);
  evaluate->add_option("--jobs", ev.jobs, "Worker threads")->default_val(1);
  evaluate->add_option("--report", ev.report, "Write the JSON report here");

  dtrlab::AccuracyArgs acc;
  auto* accuracy = app.add_subcommand("accuracy", "Agreement of a regime file with the oracle");
  accuracy->add_option("--regime", acc.regime, "Regime file (JSON)")->required();
  accuracy->add_option("--case", acc.case_name, "case1 or case2")->default_val("case1");
  accuracy->add_option("--spec", acc.spec_file, "DGP config file (JSON)");
  accuracy->add_option("--n-test", acc.n_test, "Test set size")->default_val(1000);
  seed_option(accuracy, acc.seed);
  accuracy->add_option("--report", acc.report, "Write the JSON report here");

  dtrlab::BenchmarkArgs bm;
  auto* bench = app.add_subcommand("benchmark", "Replicated simulation study");
  bench->add_option("--suite", bm.suite, "case1 or case2")->default_val("case1");
  bench->add_option("--replications,-R", bm.replications, "Replications")->default_val(200);
  bench->add_option("--sizes", bm.sizes, "Training sizes, comma separated")->default_val("1000");
  bench->add_option("--methods", bm.methods, "Methods, comma separated")->default_val("q,a3");
  seed_option(bench, bm.seed);
  bench->add_option("--jobs", bm.jobs, "Worker threads")->default_val(1);
  bench->add_option("--n-test", bm.n_test, "Test set size for decision accuracy (0 skips)")
      ->default_val(1000);
  bench->add_option("--mc-draws", bm.mc_draws, "Monte Carlo draws per fitted regime (0 skips)")
      ->default_val(0);
  bench->add_option("--config", bm.config, "Model formula overrides (JSON)");
  bench->add_option("--set", bm.sets, "Override a model key");
  bench->add_option("--out", bm.out, "Output directory for CSV tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*simulate) dtrlab::cmd_simulate(sim, std::cout, std::cerr);
    else if (*fitc) dtrlab::cmd_fit(fit, std::cout, std::cerr);
    else if (*evaluate) dtrlab::cmd_evaluate(ev, std::cout, std::cerr);
    else if (*accuracy) dtrlab::cmd_accuracy(acc, std::cout, std::cerr);
    else if (*bench) dtrlab::cmd_benchmark(bm, std::cout, std::cerr);
  } catch (const dtr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dtrlab::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
