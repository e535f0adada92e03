#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace bridge {

// Stateless 64-bit mixer (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

// Counter-based child seed: derive_seed(base, i) is independent of every
// other (base, j), so item i of a corpus can be regenerated on its own.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t counter);

// Seeded generator with hand-rolled distributions. The standard library's
// distributions are implementation-defined; these are not, so outputs are
// identical on every toolchain that implements mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  std::size_t index(std::size_t n);
  double uniform01();
  bool bernoulli(double p);
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[index(v.size())];
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Standard normal draw fully determined by (seed, a, b); used for streaming
// projection matrices without storing them.
double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b);
// out[b] = counter_normal(seed, a, b) for b < n.
void counter_normal_row(std::uint64_t seed, std::uint64_t a, double* out, std::size_t n);

}  // namespace bridge
