#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace dtrlab {

/// Flat key/value run parameters merged from a JSON config file and
/// `--set key=value` overrides (later wins).
class RunConfig {
 public:
  RunConfig() : values_(nlohmann::json::object()) {}
  explicit RunConfig(nlohmann::json values);

  static RunConfig from_file(const std::string& path);
  /// `value` is read as JSON when it parses, as a string otherwise.
  void set(const std::string& assignment);
  void set(const std::string& key, nlohmann::json value) { values_[key] = std::move(value); }
  void merge(const nlohmann::json& overrides);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Throws ConfigError naming the key and `block` when absent.
  std::string require_string(const std::string& key, const std::string& block) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const nlohmann::json& values() const noexcept { return values_; }
  /// FNV-1a over the canonical JSON dump, as 16 hex digits.
  std::string hash() const;

 private:
  nlohmann::json values_;
};

std::string fnv1a_hex(const std::string& bytes);

struct SeedChoice {
  std::uint64_t seed = 0;
  std::string source;  // "flag", "DTRLAB_SEED" or "default"
};

/// Explicit flag, else the DTRLAB_SEED environment variable, else 1.
SeedChoice resolve_seed(std::optional<std::uint64_t> flag);

std::vector<std::string> split_list(const std::string& text, char sep = ',');

}  // namespace dtrlab
