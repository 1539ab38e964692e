#include "dtr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dtr/error.hpp"

namespace dtr {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "na"; }

double parse_number(const std::string& cell, std::size_t line, const std::string& column) {
  double v = 0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  if (!cell.empty() && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v))
    throw DataError("line " + std::to_string(line) + ", column " + column + ": '" + cell +
                    "' is not a finite number");
  return v;
}

int parse_action(const std::string& cell, std::size_t line, const std::string& column) {
  const double v = parse_number(cell, line, column);
  if (v != 0.0 && v != 1.0)
    throw DataError("line " + std::to_string(line) + ", column " + column + ": action '" + cell +
                    "' is not 0 or 1");
  return static_cast<int>(v);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
};

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError("line " + std::to_string(no) + " has " + std::to_string(cells.size()) +
                      " cells, the header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
    t.lines.push_back(no);
  }
  if (t.header.empty()) throw DataError("CSV input is empty");
  for (std::size_t i = 0; i < t.header.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (t.header[i] == t.header[k]) throw DataError("duplicate column '" + t.header[i] + "'");
  return t;
}

std::size_t column_of(const Table& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return i;
  throw DataError("CSV has no column '" + name + "'");
}

std::string kernel_name(Kernel k) { return k == Kernel::linear ? "linear" : "rbf"; }

std::string canonical_formula(const FeatureMap& m) {
  if (m.empty()) return "none";
  std::string s;
  if (m.labels().front() != "1") s = "0";
  for (const auto& l : m.labels()) {
    if (!s.empty()) s += ",";
    s += l;
  }
  return s;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + " is missing \"" + key + "\"");
  return j.at(key);
}

// Numbers become constant expressions.
std::string expression_text(const json& j) {
  if (j.is_number()) return format_double(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  throw ConfigError("expected an expression string or a number, got " + j.dump());
}

HistoryFn history_fn(const json& j, const Schema& schema, int stage) {
  auto e = Expression::compile(expression_text(j), schema, stage);
  return [e](const History& h) { return e(h); };
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

Dataset read_csv(std::istream& in) {
  const Table t = read_table(in);
  const std::size_t ncol = t.header.size();
  std::size_t y_col = ncol;
  std::vector<std::vector<std::size_t>> cov_cols(1);
  std::vector<std::size_t> act_cols;
  for (std::size_t c = 0; c < ncol; ++c) {
    const auto& name = t.header[c];
    if (name == "Y") {
      y_col = c;
    } else if (int k = Schema::parse_action_label(name); k > 0) {
      if (k != static_cast<int>(act_cols.size()) + 1)
        throw DataError("action column " + name + " is out of order");
      act_cols.push_back(c);
      cov_cols.emplace_back();
    } else {
      cov_cols.back().push_back(c);
    }
  }
  if (y_col == ncol) throw DataError("CSV has no outcome column 'Y'");
  if (act_cols.empty()) throw DataError("CSV has no action columns (A1, A2, ...)");
  if (!cov_cols.back().empty())
    throw DataError("column '" + t.header[cov_cols.back().front()] + "' follows the last action");
  cov_cols.pop_back();

  const int K = static_cast<int>(act_cols.size());
  std::vector<std::vector<std::string>> labels(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    for (auto c : cov_cols[k]) labels[k].push_back(t.header[c]);
  Schema schema(std::move(labels));

  std::vector<Trajectory> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    const std::size_t line = t.lines[r];
    Trajectory tr;
    bool ended = false;
    for (int k = 0; k < K; ++k) {
      const bool no_action = missing(cells[act_cols[k]]);
      if (ended && !no_action)
        throw DataError("line " + std::to_string(line) + ": " + Schema::action_label(k + 1) +
                        " is set after an earlier stage is missing");
      if (ended || no_action) {
        for (auto c : cov_cols[k])
          if (!missing(cells[c]))
            throw DataError("line " + std::to_string(line) + ": column " + t.header[c] +
                            " is set but " + Schema::action_label(k + 1) + " is missing");
        ended = true;
        continue;
      }
      StageObs obs;
      for (auto c : cov_cols[k]) {
        if (missing(cells[c]))
          throw DataError("line " + std::to_string(line) + ": missing value in column " +
                          t.header[c]);
        obs.covariates.push_back(parse_number(cells[c], line, t.header[c]));
      }
      obs.action = parse_action(cells[act_cols[k]], line, t.header[act_cols[k]]);
      tr.stages.push_back(std::move(obs));
    }
    if (tr.stages.empty())
      throw DataError("line " + std::to_string(line) + ": no stage-1 action");
    if (missing(cells[y_col])) throw DataError("line " + std::to_string(line) + ": Y is missing");
    tr.outcome = parse_number(cells[y_col], line, "Y");
    rows.push_back(std::move(tr));
  }
  return Dataset(std::move(schema), std::move(rows));
}

void write_csv(std::ostream& out, const Dataset& data) {
  const Schema& s = data.schema();
  const int K = s.stages();
  std::string header;
  for (int k = 1; k <= K; ++k) {
    for (const auto& l : s.labels(k)) header += l + ",";
    header += Schema::action_label(k) + ",";
  }
  out << header << "Y\n";
  std::string line;
  for (const auto& t : data.trajectories()) {
    line.clear();
    for (int k = 1; k <= K; ++k) {
      if (k <= t.terminal_stage()) {
        for (double v : t.stages[k - 1].covariates) line += format_double(v) + ",";
        line += std::to_string(t.stages[k - 1].action) + ",";
      } else {
        line.append(static_cast<std::size_t>(s.dim(k)) + 1, ',');
      }
    }
    line += format_double(t.outcome);
    out << line << '\n';
  }
}

Dataset read_long_csv(std::istream& in) {
  const Table t = read_table(in);
  const std::size_t id_col = column_of(t, "id"), st_col = column_of(t, "stage"),
                    a_col = column_of(t, "A"), y_col = column_of(t, "Y");
  std::vector<std::size_t> cov;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != id_col && c != st_col && c != a_col && c != y_col) cov.push_back(c);

  struct Person {
    std::map<int, std::size_t> rows;  // stage -> table row
  };
  std::vector<std::string> order;
  std::map<std::string, Person> people;
  int K = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    const double sv = parse_number(cells[st_col], t.lines[r], "stage");
    if (sv < 1 || sv != std::floor(sv))
      throw DataError("line " + std::to_string(t.lines[r]) + ": stage must be a positive integer");
    const int stage = static_cast<int>(sv);
    auto [it, fresh] = people.try_emplace(cells[id_col]);
    if (fresh) order.push_back(cells[id_col]);
    if (!it->second.rows.emplace(stage, r).second)
      throw DataError("id " + cells[id_col] + " has two rows for stage " + std::to_string(stage));
    K = std::max(K, stage);
  }
  // Covariates used at each stage.
  std::vector<std::vector<std::size_t>> used(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k)
    for (auto c : cov)
      for (const auto& [id, p] : people)
        if (auto f = p.rows.find(k); f != p.rows.end() && !missing(t.rows[f->second][c])) {
          used[k - 1].push_back(c);
          break;
        }
  std::vector<std::vector<std::string>> labels(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k)
    for (auto c : used[k - 1]) {
      int uses = 0;
      for (const auto& u : used) uses += std::count(u.begin(), u.end(), c) > 0;
      labels[k - 1].push_back(uses > 1 ? t.header[c] + "_" + std::to_string(k) : t.header[c]);
    }
  Schema schema(std::move(labels));

  std::vector<Trajectory> rows;
  for (const auto& id : order) {
    const auto& p = people.at(id);
    Trajectory tr;
    std::optional<double> y;
    int expect = 1;
    for (const auto& [stage, r] : p.rows) {
      const std::size_t line = t.lines[r];
      if (stage != expect)
        throw DataError("id " + id + " skips stage " + std::to_string(expect));
      ++expect;
      StageObs obs;
      for (auto c : used[stage - 1]) {
        if (missing(t.rows[r][c]))
          throw DataError("line " + std::to_string(line) + ": missing value in column " +
                          t.header[c]);
        obs.covariates.push_back(parse_number(t.rows[r][c], line, t.header[c]));
      }
      obs.action = parse_action(t.rows[r][a_col], line, "A");
      tr.stages.push_back(std::move(obs));
      if (!missing(t.rows[r][y_col])) {
        const double v = parse_number(t.rows[r][y_col], line, "Y");
        if (y && *y != v) throw DataError("id " + id + " has conflicting Y values");
        y = v;
      }
    }
    if (!y) throw DataError("id " + id + " has no Y value");
    tr.outcome = *y;
    rows.push_back(std::move(tr));
  }
  return Dataset(std::move(schema), std::move(rows));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset load_dataset(const std::string& path, bool long_format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return long_format ? read_long_csv(in) : read_csv(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.detail(), e.stage());
  }
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, data);
  if (!out) throw DataError("write to '" + path + "' failed");
}

json rule_to_json(const Rule& rule) {
  return std::visit(
      [](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, LinearSignRule>) {
          return {{"type", "linear"}, {"features", canonical_formula(r.features)},
                  {"coef", to_vector(r.coef)}};
        } else if constexpr (std::is_same_v<T, ThresholdRule>) {
          return {{"type", "threshold"}, {"variable", r.name}, {"cutoff", r.cutoff},
                  {"direction", r.direction == Direction::below ? "below" : "above"}};
        } else if constexpr (std::is_same_v<T, TreeRule>) {
          return {{"type", "tree"}, {"features", canonical_formula(r.features)},
                  {"tree", r.tree->to_json()}};
        } else if constexpr (std::is_same_v<T, DecisionFnRule>) {
          const auto& f = *r.fn;
          json support = json::array();
          for (Eigen::Index i = 0; i < f.support().rows(); ++i)
            support.push_back(to_vector(f.support().row(i).transpose()));
          return {{"type", "decision_function"}, {"features", canonical_formula(r.features)},
                  {"kernel", kernel_name(f.kernel())}, {"gamma", f.gamma()},
                  {"center", to_vector(f.center())}, {"scale", to_vector(f.scale())},
                  {"support", support}, {"coef", to_vector(f.coef())},
                  {"intercept", f.intercept()}};
        } else {
          return {{"type", "expression"}, {"expr", r.expr.text()}};
        }
      },
      rule);
}

Rule rule_from_json(const json& j, const Schema& schema, int stage) {
  const std::string where = "stage-" + std::to_string(stage) + " rule";
  try {
    const auto type = need(j, "type", where).get<std::string>();
    if (type == "linear") {
      auto f = FeatureMap::parse(need(j, "features", where).get<std::string>(), schema, stage);
      auto coef = from_vector(need(j, "coef", where));
      if (coef.size() != f.size())
        throw ConfigError(where + ": " + std::to_string(coef.size()) + " coefficients for " +
                          std::to_string(f.size()) + " features");
      return LinearSignRule{std::move(f), std::move(coef)};
    }
    if (type == "threshold") {
      ThresholdRule r;
      r.name = need(j, "variable", where).get<std::string>();
      auto ref = schema.find(r.name);
      if (!ref || ref->stage > stage)
        throw ConfigError(where + ": '" + r.name + "' is not in the stage history");
      r.variable = *ref;
      r.cutoff = need(j, "cutoff", where).get<double>();
      const auto dir = j.value("direction", std::string("below"));
      if (dir != "below" && dir != "above")
        throw ConfigError(where + ": direction must be below or above");
      r.direction = dir == "below" ? Direction::below : Direction::above;
      return r;
    }
    if (type == "tree") {
      auto f = FeatureMap::parse(need(j, "features", where).get<std::string>(), schema, stage,
                                 false);
      auto tree = std::make_shared<CausalTree>(CausalTree::from_json(need(j, "tree", where)));
      if (tree->n_features() != f.size())
        throw ConfigError(where + ": tree uses " + std::to_string(tree->n_features()) +
                          " features, formula gives " + std::to_string(f.size()));
      return TreeRule{std::move(tree), std::move(f)};
    }
    if (type == "decision_function") {
      auto f = FeatureMap::parse(need(j, "features", where).get<std::string>(), schema, stage,
                                 false);
      const auto kname = need(j, "kernel", where).get<std::string>();
      if (kname != "linear" && kname != "rbf")
        throw ConfigError(where + ": kernel must be linear or rbf");
      const auto& sup = need(j, "support", where);
      auto center = from_vector(need(j, "center", where));
      Eigen::MatrixXd support(static_cast<Eigen::Index>(sup.size()), center.size());
      for (std::size_t i = 0; i < sup.size(); ++i) {
        auto row = from_vector(sup[i]);
        if (row.size() != center.size()) throw ConfigError(where + ": support row has wrong length");
        support.row(static_cast<Eigen::Index>(i)) = row.transpose();
      }
      if (center.size() != f.size())
        throw ConfigError(where + ": decision function dimension does not match the features");
      auto fn = std::make_shared<DecisionFunction>(
          kname == "linear" ? Kernel::linear : Kernel::rbf, j.value("gamma", 0.0), center,
          from_vector(need(j, "scale", where)), support, from_vector(need(j, "coef", where)),
          j.value("intercept", 0.0));
      return DecisionFnRule{std::move(fn), std::move(f)};
    }
    if (type == "expression")
      return ExpressionRule{
          Expression::compile(need(j, "expr", where).get<std::string>(), schema, stage)};
    throw ConfigError(where + ": unknown rule type '" + type + "'");
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

json regime_to_json(const Regime& regime) {
  json stages = json::array();
  for (const auto& r : regime.rules()) stages.push_back(rule_to_json(r));
  return {{"stages", stages}};
}

Regime regime_from_json(const json& j, const Schema& schema) {
  const auto& stages = need(j, "stages", "regime");
  if (!stages.is_array()) throw ConfigError("regime \"stages\" must be an array");
  if (static_cast<int>(stages.size()) != schema.stages())
    throw ConfigError("regime has " + std::to_string(stages.size()) + " stages, the data has " +
                      std::to_string(schema.stages()));
  std::vector<Rule> rules;
  for (std::size_t k = 0; k < stages.size(); ++k)
    rules.push_back(rule_from_json(stages[k], schema, static_cast<int>(k) + 1));
  return Regime(std::move(rules));
}

DgpSpec dgp_from_json(const json& j) {
  try {
    DgpSpec spec;
    spec.name = j.value("name", std::string("custom"));
    spec.mu0 = j.value("mu0", 0.0);
    spec.outcome_sd = j.value("outcome_sd", 1.0);
    if (!(spec.outcome_sd >= 0)) throw ConfigError("DGP outcome_sd must be nonnegative");
    const auto& stages = need(j, "stages", "DGP config");
    if (!stages.is_array() || stages.empty())
      throw ConfigError("DGP config \"stages\" must be a nonempty array");

    std::vector<std::vector<std::string>> labels;
    for (const auto& s : stages) {
      labels.emplace_back();
      for (const auto& c : need(s, "covariates", "DGP stage"))
        labels.back().push_back(need(c, "name", "DGP covariate").get<std::string>());
    }
    const Schema schema(labels);

    std::vector<Rule> oracle;
    for (std::size_t k = 0; k < stages.size(); ++k) {
      const int stage = static_cast<int>(k) + 1;
      const auto& s = stages[k];
      const std::string where = "DGP stage " + std::to_string(stage);
      DgpStage st;
      for (const auto& c : s.at("covariates")) {
        CovariateSampler cs;
        cs.name = c.at("name").get<std::string>();
        cs.mean = history_fn(need(c, "mean", "covariate " + cs.name), schema, stage);
        cs.sd = history_fn(c.value("sd", json(1.0)), schema, stage);
        if (c.contains("lower") && !c["lower"].is_null()) cs.lower = c["lower"].get<double>();
        if (c.contains("upper") && !c["upper"].is_null()) cs.upper = c["upper"].get<double>();
        st.covariates.push_back(std::move(cs));
      }
      st.propensity = history_fn(need(s, "propensity", where), schema, stage);
      auto regret =
          Expression::compile(expression_text(need(s, "regret", where)), schema, stage, true);
      st.regret = [regret](const History& h, int a) { return regret(h, a); };
      if (s.contains("mean_zero")) st.mean_zero = history_fn(s["mean_zero"], schema, stage);
      const auto& o = need(s, "oracle", where);
      if (o.is_object()) oracle.push_back(rule_from_json(o, schema, stage));
      else oracle.push_back(ExpressionRule{Expression::compile(expression_text(o), schema, stage)});
      spec.stages.push_back(std::move(st));
    }
    spec.oracle = Regime(std::move(oracle));
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("DGP config: ") + e.what());
  }
}

}  // namespace dtr
