#include "dtr/fit.hpp"

#include "dtr/error.hpp"

namespace dtr {

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"q",     "a1",    "a2",    "a3",   "a4",
                                                 "dwols", "ctree", "ipwe", "aipwe", "bowl"};
  return names;
}

std::string to_string(Method m) { return method_names()[static_cast<std::size_t>(m)]; }

Method parse_method(const std::string& name) {
  const auto& names = method_names();
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return static_cast<Method>(k);
  std::string list;
  for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
  throw ConfigError("unknown method '" + name + "' (expected one of: " + list + ")");
}

int FitResult::clipped_total() const {
  int c = 0;
  for (const auto& s : stages) c += s.clipped;
  return c;
}

double FitResult::q_value(const History& h, int action) const {
  const auto& s = stage(h.stage());
  if (s.psi.size() != s.contrast.size() || s.xi.size() != s.tfree.size())
    throw ConfigError("fit has no linear Q-function for stage " + std::to_string(h.stage()));
  double q = 0.0;
  if (action == 1 && s.contrast.size() > 0) q += s.psi.dot(s.contrast(h));
  if (s.tfree.size() > 0) q += s.xi.dot(s.tfree(h));
  return q;
}

}  // namespace dtr
