#include "dtr/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>

#include "dtr/error.hpp"

namespace dtr {
namespace {

std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  return mix64(mix64(base) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    s = z ^ (z >> 31);
  }
}

std::uint64_t Rng::next() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  // 53 random bits, shifted by half an ulp so 0 is never produced.
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

double Rng::truncated_normal(double mean, double sd, double lower, double upper) {
  if (!(sd > 0.0) || !(lower < upper))
    throw ConfigError("truncated normal needs sd > 0 and lower < upper");
  static const boost::math::normal_distribution<double> std_normal;
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  const double u = uniform();
  double z;
  if (a > 0.0) {
    // Work with upper tails when the interval sits right of the mean so the
    // probabilities do not collapse to 1.
    const double qa = std::isinf(a) ? 0.0 : boost::math::cdf(boost::math::complement(std_normal, a));
    const double qb = std::isinf(b) ? 0.0 : boost::math::cdf(boost::math::complement(std_normal, b));
    const double q = qa - u * (qa - qb);
    z = boost::math::quantile(boost::math::complement(std_normal, q));
  } else {
    const double pa = std::isinf(a) ? 0.0 : boost::math::cdf(std_normal, a);
    const double pb = std::isinf(b) ? 1.0 : boost::math::cdf(std_normal, b);
    const double p = pa + u * (pb - pa);
    z = boost::math::quantile(std_normal, p);
  }
  double x = mean + sd * z;
  // Guard against rounding at the interval ends.
  if (x <= lower) x = std::nextafter(lower, upper);
  if (x >= upper) x = std::nextafter(upper, lower);
  return x;
}

std::uint64_t Rng::index(std::uint64_t n) noexcept {
  // Lemire's nearly divisionless bounded integers.
  __uint128_t m = static_cast<__uint128_t>(next()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<__uint128_t>(next()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace dtr
