#include "dtr/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <vector>

#include "dtr/error.hpp"

namespace dtr {

struct Expression::Node {
  enum class Kind { number, covariate, past_action, current_action, unary, binary, call };
  Kind kind = Kind::number;
  double value = 0.0;
  VariableRef ref;
  int action_stage = 0;
  std::string op;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

class Parser {
 public:
  Parser(const std::string& text, const Schema& schema, int stage, bool allow_action)
      : s_(text), schema_(schema), stage_(stage), allow_action_(allow_action) {}

  NodePtr parse() {
    auto n = parse_or();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + s_.substr(pos_, 1) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression '" + s_ + "': " + what + " at offset " + std::to_string(pos_),
                      stage_);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(const std::string& tok) {
    skip_ws();
    if (s_.compare(pos_, tok.size(), tok) != 0) return false;
    if (std::isalpha(static_cast<unsigned char>(tok[0]))) {
      const std::size_t end = pos_ + tok.size();
      if (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
        return false;
    }
    pos_ += tok.size();
    return true;
  }

  static NodePtr binary(std::string op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::binary;
    n->op = std::move(op);
    n->args = {std::move(a), std::move(b)};
    return n;
  }

  NodePtr parse_or() {
    auto lhs = parse_and();
    while (accept("||") || accept("or")) lhs = binary("||", lhs, parse_and());
    return lhs;
  }

  NodePtr parse_and() {
    auto lhs = parse_cmp();
    while (accept("&&") || accept("and")) lhs = binary("&&", lhs, parse_cmp());
    return lhs;
  }

  NodePtr parse_cmp() {
    auto lhs = parse_add();
    for (const char* op : {"<=", ">=", "==", "!=", "<", ">"}) {
      if (accept(op)) return binary(op, lhs, parse_add());
    }
    return lhs;
  }

  NodePtr parse_add() {
    auto lhs = parse_mul();
    for (;;) {
      if (accept("+")) lhs = binary("+", lhs, parse_mul());
      else if (accept("-")) lhs = binary("-", lhs, parse_mul());
      else return lhs;
    }
  }

  NodePtr parse_mul() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept("*")) lhs = binary("*", lhs, parse_unary());
      else if (accept("/")) lhs = binary("/", lhs, parse_unary());
      else return lhs;
    }
  }

  NodePtr parse_unary() {
    skip_ws();
    if (s_.compare(pos_, 2, "!=") != 0 && accept("!")) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::unary;
      n->op = "!";
      n->args = {parse_unary()};
      return n;
    }
    if (accept("-")) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::unary;
      n->op = "-";
      n->args = {parse_unary()};
      return n;
    }
    if (accept("+")) return parse_unary();
    return parse_pow();
  }

  NodePtr parse_pow() {
    auto base = parse_primary();
    if (accept("^")) return binary("^", base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = parse_or();
      if (!accept(")")) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_' || s_[end] == '.'))
        ++end;
      std::string name = s_.substr(pos_, end - pos_);
      pos_ = end;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == '(') return parse_call(name);
      return resolve(name);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr parse_number() {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc()) fail("bad number");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    auto n = std::make_shared<Node>();
    n->value = v;
    return n;
  }

  NodePtr parse_call(const std::string& name) {
    static const std::vector<std::pair<std::string, int>> arity = {
        {"exp", 1}, {"log", 1}, {"sqrt", 1}, {"abs", 1}, {"expit", 1},
        {"I", 1},   {"min", 2}, {"max", 2},  {"pow", 2}};
    int want = -1;
    for (const auto& [f, k] : arity)
      if (f == name) want = k;
    if (want < 0) fail("unknown function '" + name + "'");
    accept("(");
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::call;
    n->op = name;
    n->args.push_back(parse_or());
    while (accept(",")) n->args.push_back(parse_or());
    if (!accept(")")) fail("expected ')'");
    if (static_cast<int>(n->args.size()) != want)
      fail(name + " takes " + std::to_string(want) + " argument(s)");
    return n;
  }

  NodePtr resolve(const std::string& name) {
    auto n = std::make_shared<Node>();
    if (name == "A") {
      if (!allow_action_) fail("the current action is not available here");
      n->kind = Node::Kind::current_action;
      return n;
    }
    if (int k = Schema::parse_action_label(name); k > 0) {
      if (k == stage_ && allow_action_) {
        n->kind = Node::Kind::current_action;
        return n;
      }
      if (k >= stage_) fail("action '" + name + "' is not part of the history");
      n->kind = Node::Kind::past_action;
      n->action_stage = k;
      return n;
    }
    auto ref = schema_.find(name);
    if (!ref) fail("unknown variable '" + name + "'");
    if (ref->stage > stage_) fail("variable '" + name + "' is not observed yet");
    n->kind = Node::Kind::covariate;
    n->ref = *ref;
    return n;
  }

  const std::string& s_;
  const Schema& schema_;
  int stage_;
  bool allow_action_;
  std::size_t pos_ = 0;
};

double eval(const Node& n, const History& h, int action) {
  switch (n.kind) {
    case Node::Kind::number:
      return n.value;
    case Node::Kind::covariate:
      return h.covariate(n.ref.stage, n.ref.index);
    case Node::Kind::past_action:
      return h.action(n.action_stage);
    case Node::Kind::current_action:
      return action;
    case Node::Kind::unary: {
      const double x = eval(*n.args[0], h, action);
      return n.op == "-" ? -x : (x == 0.0 ? 1.0 : 0.0);
    }
    case Node::Kind::binary: {
      const double a = eval(*n.args[0], h, action);
      if (n.op == "||" && a != 0.0) return 1.0;
      if (n.op == "&&" && a == 0.0) return 0.0;
      const double b = eval(*n.args[1], h, action);
      const char c0 = n.op[0];
      if (n.op.size() == 1) {
        switch (c0) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          case '/': return a / b;
          case '^': return std::pow(a, b);
          case '<': return a < b;
          case '>': return a > b;
        }
      }
      if (n.op == "<=") return a <= b;
      if (n.op == ">=") return a >= b;
      if (n.op == "==") return a == b;
      if (n.op == "!=") return a != b;
      return b != 0.0;  // || and && after short-circuit
    }
    case Node::Kind::call: {
      const double x = eval(*n.args[0], h, action);
      if (n.op == "exp") return std::exp(x);
      if (n.op == "log") return std::log(x);
      if (n.op == "sqrt") return std::sqrt(x);
      if (n.op == "abs") return std::abs(x);
      if (n.op == "expit") return expit(x);
      if (n.op == "I") return x != 0.0 ? 1.0 : 0.0;
      const double y = eval(*n.args[1], h, action);
      if (n.op == "min") return std::min(x, y);
      if (n.op == "max") return std::max(x, y);
      return std::pow(x, y);
    }
  }
  return 0.0;
}

}  // namespace

Expression Expression::compile(const std::string& text, const Schema& schema, int stage,
                               bool allow_current_action) {
  if (stage < 1 || stage > schema.stages())
    throw ConfigError("expression '" + text + "' refers to a stage outside the schema", stage);
  Expression e;
  e.root_ = Parser(text, schema, stage, allow_current_action).parse();
  e.text_ = text;
  e.stage_ = stage;
  return e;
}

double Expression::operator()(const History& h, int action) const {
  if (!root_) throw ConfigError("evaluating an empty expression");
  return eval(*root_, h, action);
}

}  // namespace dtr
