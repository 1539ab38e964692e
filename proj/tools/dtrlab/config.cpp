#include "dtrlab/config.hpp"

#include <charconv>
#include <cstdlib>

#include "dtr/error.hpp"
#include "dtr/io.hpp"

namespace dtrlab {

using nlohmann::json;

RunConfig::RunConfig(json values) : values_(std::move(values)) {
  if (!values_.is_object()) throw dtr::ConfigError("config must be a JSON object");
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::string text;
  try {
    text = dtr::read_text_file(path);
  } catch (const dtr::DataError& e) {
    throw dtr::ConfigError(e.detail());
  }
  try {
    return RunConfig(json::parse(text));
  } catch (const json::parse_error& e) {
    throw dtr::ConfigError(path + ": " + e.what());
  }
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw dtr::ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json v = json::parse(raw, nullptr, false);
  values_[key] = v.is_discarded() ? json(raw) : v;
}

void RunConfig::merge(const json& overrides) {
  for (const auto& [k, v] : overrides.items()) values_[k] = v;
}

bool RunConfig::has(const std::string& key) const {
  return values_.contains(key) && !values_.at(key).is_null();
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return dtr::format_double(v.get<double>());
  throw dtr::ConfigError("config key '" + key + "' must be a string");
}

std::string RunConfig::require_string(const std::string& key, const std::string& block) const {
  if (!has(key)) throw dtr::ConfigError("missing '" + key + "' (" + block + ")");
  return get_string(key, "");
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (v.is_number()) return v.get<double>();
  throw dtr::ConfigError("config key '" + key + "' must be a number");
}

long RunConfig::get_int(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (v.is_number_integer()) return v.get<long>();
  throw dtr::ConfigError("config key '" + key + "' must be an integer");
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = values_.at(key);
  if (v.is_boolean()) return v.get<bool>();
  throw dtr::ConfigError("config key '" + key + "' must be true or false");
}

std::string RunConfig::hash() const { return fnv1a_hex(values_.dump()); }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SeedChoice resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return {*flag, "flag"};
  if (const char* env = std::getenv("DTRLAB_SEED"); env && *env) {
    std::uint64_t v = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [p, ec] = std::from_chars(env, end, v);
    if (ec != std::errc() || p != end)
      throw dtr::ConfigError(std::string("DTRLAB_SEED is not an unsigned integer: '") + env + "'");
    return {v, "DTRLAB_SEED"};
  }
  return {1, "default"};
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(sep, start);
    if (pos == std::string::npos) pos = text.size();
    auto item = text.substr(start, pos - start);
    auto b = item.find_first_not_of(" \t");
    auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    start = pos + 1;
  }
  return out;
}

}  // namespace dtrlab
