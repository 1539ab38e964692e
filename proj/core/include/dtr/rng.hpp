#pragma once

#include <cstdint>

namespace dtr {

/// splitmix64 finalizer; used for seeding and stream derivation.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for an independent stream `stream` derived from `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

/// xoshiro256** with explicit seed threading. Output is identical on every
/// platform for a given seed, which the simulation and bootstrap code rely
/// on for bit-for-bit reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent generator for sub-stream `stream`. Depends only on the
  /// construction seed, not on how many draws were taken.
  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  std::uint64_t next() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }
  int bernoulli(double p) noexcept { return uniform() < p ? 1 : 0; }
  /// Normal(mean, sd) restricted to (lower, upper) by inverse CDF. Infinite
  /// bounds are allowed.
  double truncated_normal(double mean, double sd, double lower, double upper);
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dtr
