#include "bridge/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bridge {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t counter) {
  return mix64(mix64(base) ^ mix64(counter * 0xD1B54A32D192ED03ULL + 1));
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) {
    throw std::invalid_argument("Rng::uniform_int: empty range");
  }
  const auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
  if (span == UINT64_MAX) {
    return static_cast<std::int64_t>(next());
  }
  const std::uint64_t n = span + 1;
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t r = next();
  while (r >= limit) {
    r = next();
  }
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + r % n);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("Rng::index: empty range");
  }
  return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
}

double Rng::uniform01() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

bool Rng::bernoulli(double p) {
  if (p <= 0.0) {
    return false;
  }
  if (p >= 1.0) {
    return true;
  }
  return uniform01() < p;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) {
    u1 = uniform01();
  }
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

namespace {

// Box-Muller pair for entries (2j, 2j+1) of row a.
std::pair<double, double> counter_pair(std::uint64_t seed, std::uint64_t a, std::uint64_t j) {
  const std::uint64_t key = mix64(seed ^ mix64(a * 0x9E3779B97F4A7C15ULL ^ mix64(j)));
  const std::uint64_t h1 = mix64(key);
  const std::uint64_t h2 = mix64(key ^ 0x5851F42D4C957F2DULL);
  // (0, 1] so the log is finite.
  const double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(t), r * std::sin(t)};
}

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const auto [c, s] = counter_pair(seed, a, b >> 1);
  return (b & 1U) != 0 ? s : c;
}

void counter_normal_row(std::uint64_t seed, std::uint64_t a, double* out, std::size_t n) {
  for (std::size_t j = 0; 2 * j < n; ++j) {
    const auto [c, s] = counter_pair(seed, a, j);
    out[2 * j] = c;
    if (2 * j + 1 < n) out[2 * j + 1] = s;
  }
}

}  // namespace bridge
