#include "dtrlab/suite.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dtr/error.hpp"
#include "dtr/io.hpp"
#include "dtr/parallel.hpp"
#include "dtr/rng.hpp"
#include "dtrlab/estimate.hpp"

namespace dtrlab {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell(double x) { return std::isfinite(x) ? dtr::format_double(x) : "NA"; }

std::string fixed(double x, int digits) {
  if (!std::isfinite(x)) return "NA";
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = kNaN;
  if (v.empty()) return;
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  mean = m;
  if (v.size() < 2) return;
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double truth_of(const std::string& suite, const std::string& name) {
  if (suite != "case1") return kNaN;
  static const std::map<std::string, double> t = {
      {"psi1_1", 250}, {"psi1_L1", -1},  {"psi2_1", 720},
      {"psi2_L2", -2}, {"threshold1", 250}, {"threshold2", 360}};
  auto it = t.find(name);
  return it == t.end() ? kNaN : it->second;
}

dtr::Dataset generate(const std::string& suite, std::size_t n, std::uint64_t seed) {
  return suite == "case1" ? dtr::generate_case1(n, seed) : dtr::generate_case2(n, seed);
}

}  // namespace

int MethodSummary::find(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return static_cast<int>(k);
  return -1;
}

const MethodSummary& SuiteResult::row(dtr::Method m, std::size_t n) const {
  for (const auto& r : rows)
    if (r.method == m && r.n == n) return r;
  throw dtr::ConfigError("no benchmark row for " + dtr::to_string(m) + " at n=" +
                         std::to_string(n));
}

SuiteResult run_suite(const SuiteOptions& options) {
  if (options.suite != "case1" && options.suite != "case2")
    throw dtr::ConfigError("unknown suite '" + options.suite + "' (expected case1 or case2)");
  if (options.replications < 1) throw dtr::ConfigError("replications must be at least 1");
  if (options.methods.empty()) throw dtr::ConfigError("no methods selected");
  if (options.sizes.empty()) throw dtr::ConfigError("no sample sizes selected");

  SuiteResult result;
  result.options = options;
  result.config = options.suite == "case1" ? case1_fit_config() : case2_fit_config();
  result.config.merge(options.overrides.values());
  const dtr::DgpSpec dgp = options.suite == "case1" ? dtr::case1_spec() : dtr::case2_spec();
  const auto R = static_cast<std::size_t>(options.replications);
  const std::size_t M = options.methods.size();

  for (std::size_t si = 0; si < options.sizes.size(); ++si) {
    const std::size_t n = options.sizes[si];
    std::vector<std::vector<ReplicateRecord>> recs(R, std::vector<ReplicateRecord>(M));
    dtr::parallel_for(R, options.jobs, [&](std::size_t r) {
      const std::uint64_t rs = dtr::derive_seed(dtr::derive_seed(options.seed, si), r);
      const dtr::Dataset train = generate(options.suite, n, dtr::derive_seed(rs, 0));
      dtr::Dataset test;
      if (options.n_test > 0) test = generate(options.suite, options.n_test, dtr::derive_seed(rs, 1));
      for (std::size_t m = 0; m < M; ++m) {
        auto& rec = recs[r][m];
        const auto method = options.methods[m];
        try {
          const auto e = estimate(method, train, result.config,
                                  dtr::derive_seed(rs, 10 + static_cast<std::uint64_t>(method)));
          const auto p = parameters(e);
          rec.names = p.names;
          rec.params = p.values;
          rec.clipped = e.fit.clipped_total();
          if (options.n_test > 0)
            rec.accuracy = dtr::decision_accuracy(e.fit.regime, dgp.oracle, test);
          if (options.mc_draws > 0)
            rec.value = dtr::mc_value(e.fit.regime, dgp, options.mc_draws, dtr::derive_seed(rs, 2)).value;
          rec.ok = true;
        } catch (const dtr::Error& err) {
          rec.ok = false;
          rec.error = err.what();
        }
      }
    });

    for (std::size_t m = 0; m < M; ++m) {
      MethodSummary s;
      s.method = options.methods[m];
      s.n = n;
      std::map<std::string, std::vector<double>> by_name;
      std::vector<std::vector<double>> acc;
      std::vector<double> overall, values;
      for (std::size_t r = 0; r < R; ++r) {
        auto& rec = recs[r][m];
        if (!rec.ok) {
          ++s.failed;
          s.replicates.push_back(std::move(rec));
          continue;
        }
        ++s.succeeded;
        s.clipped += rec.clipped;
        for (std::size_t k = 0; k < rec.names.size(); ++k) {
          if (s.find(rec.names[k]) < 0) s.names.push_back(rec.names[k]);
          by_name[rec.names[k]].push_back(rec.params[k]);
        }
        if (options.n_test > 0) {
          acc.resize(rec.accuracy.stage.size());
          for (std::size_t j = 0; j < rec.accuracy.stage.size(); ++j)
            acc[j].push_back(100.0 * rec.accuracy.stage[j]);
          overall.push_back(100.0 * rec.accuracy.overall);
        }
        if (options.mc_draws > 0) values.push_back(rec.value);
        s.replicates.push_back(std::move(rec));
      }
      if (s.failed * 5 > options.replications)
        throw dtr::NumericalError("benchmark: " + dtr::to_string(s.method) + " failed in " +
                                  std::to_string(s.failed) + " of " +
                                  std::to_string(options.replications) + " replications at n=" +
                                  std::to_string(n));
      for (const auto& name : s.names) {
        double mu, sd;
        mean_sd(by_name[name], mu, sd);
        s.truth.push_back(truth_of(options.suite, name));
        s.mean.push_back(mu);
        s.sd.push_back(sd);
        s.count.push_back(static_cast<int>(by_name[name].size()));
      }
      for (const auto& a : acc) {
        double mu, sd;
        mean_sd(a, mu, sd);
        s.accuracy_mean.push_back(mu);
        s.accuracy_sd.push_back(sd);
      }
      mean_sd(overall, s.overall_mean, s.overall_sd);
      mean_sd(values, s.value_mean, s.value_sd);
      result.rows.push_back(std::move(s));
    }
  }
  return result;
}

void write_suite(const SuiteResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw dtr::DataError("cannot create output directory '" + dir + "': " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw dtr::DataError("cannot write '" + (fs::path(dir) / name).string() + "'");
    return f;
  };
  const std::string suite = result.options.suite;

  auto est = open("estimates.csv");
  est << "suite,method,n,parameter,truth,mean,sd,bias,replications\n";
  for (const auto& s : result.rows)
    for (std::size_t k = 0; k < s.names.size(); ++k)
      est << suite << ',' << dtr::to_string(s.method) << ',' << s.n << ',' << s.names[k] << ','
          << cell(s.truth[k]) << ',' << cell(s.mean[k]) << ',' << cell(s.sd[k]) << ','
          << cell(s.mean[k] - s.truth[k]) << ',' << s.count[k] << '\n';

  auto acc = open("accuracy.csv");
  const int K = suite == "case1" ? 2 : 3;
  acc << "suite,method,n";
  for (int j = 1; j <= K; ++j) acc << ",accu" << j << "_mean,accu" << j << "_sd";
  acc << ",accu_mean,accu_sd\n";
  for (const auto& s : result.rows) {
    acc << suite << ',' << dtr::to_string(s.method) << ',' << s.n;
    for (int j = 0; j < K; ++j) {
      const bool have = static_cast<std::size_t>(j) < s.accuracy_mean.size();
      acc << ',' << cell(have ? s.accuracy_mean[j] : kNaN) << ','
          << cell(have ? s.accuracy_sd[j] : kNaN);
    }
    acc << ',' << cell(s.overall_mean) << ',' << cell(s.overall_sd) << '\n';
  }

  auto val = open("value.csv");
  val << "suite,method,n,value_mean,value_sd,succeeded,failed,clipped\n";
  for (const auto& s : result.rows)
    val << suite << ',' << dtr::to_string(s.method) << ',' << s.n << ',' << cell(s.value_mean)
        << ',' << cell(s.value_sd) << ',' << s.succeeded << ',' << s.failed << ',' << s.clipped
        << '\n';

  auto rep = open("replicates.csv");
  rep << "suite,method,n,replicate,parameter,estimate\n";
  for (const auto& s : result.rows)
    for (std::size_t r = 0; r < s.replicates.size(); ++r) {
      const auto& rec = s.replicates[r];
      const std::string head =
          suite + "," + dtr::to_string(s.method) + "," + std::to_string(s.n) + "," + std::to_string(r + 1) + ",";
      if (!rec.ok) {
        rep << head << "error,NA\n";
        continue;
      }
      for (std::size_t k = 0; k < rec.names.size(); ++k)
        rep << head << rec.names[k] << ',' << cell(rec.params[k]) << '\n';
      if (result.options.n_test > 0) rep << head << "accu," << cell(100.0 * rec.accuracy.overall) << '\n';
      if (result.options.mc_draws > 0) rep << head << "value," << cell(rec.value) << '\n';
    }

  auto txt = open("summary.txt");
  txt << render_suite(result);
}

std::string render_suite(const SuiteResult& result) {
  std::ostringstream out;
  const auto& o = result.options;
  out << "suite " << o.suite << ", " << o.replications << " replications, seed " << o.seed
      << ", config " << result.config.hash() << "\n\n";
  out << "Estimates: mean (sd)\n";
  for (const auto& s : result.rows) {
    if (s.names.empty()) continue;
    out << "  " << dtr::to_string(s.method) << " n=" << s.n << "\n";
    for (std::size_t k = 0; k < s.names.size(); ++k) {
      out << "    " << s.names[k] << ": " << fixed(s.mean[k], 4) << " (" << fixed(s.sd[k], 4) << ")";
      if (std::isfinite(s.truth[k])) out << "  truth " << dtr::format_double(s.truth[k]);
      out << "\n";
    }
  }
  if (o.n_test > 0) {
    out << "\nDecision accuracy (sd) [%] on " << o.n_test << " test rows\n";
    for (const auto& s : result.rows) {
      out << "  " << dtr::to_string(s.method) << " n=" << s.n << ":";
      for (std::size_t j = 0; j < s.accuracy_mean.size(); ++j)
        out << "  accu" << j + 1 << " " << fixed(s.accuracy_mean[j], 2) << " ("
            << fixed(s.accuracy_sd[j], 2) << ")";
      out << "  accu " << fixed(s.overall_mean, 2) << " (" << fixed(s.overall_sd, 2) << ")\n";
    }
  }
  if (o.mc_draws > 0) {
    out << "\nMonte Carlo value (sd), " << o.mc_draws << " draws per fitted regime\n";
    for (const auto& s : result.rows)
      out << "  " << dtr::to_string(s.method) << " n=" << s.n << ": " << fixed(s.value_mean, 3)
          << " (" << fixed(s.value_sd, 3) << ")\n";
  }
  out << "\nFailures\n";
  for (const auto& s : result.rows)
    out << "  " << dtr::to_string(s.method) << " n=" << s.n << ": " << s.failed << " of "
        << (s.failed + s.succeeded) << "\n";
  return out.str();
}

}  // namespace dtrlab
