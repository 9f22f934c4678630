// Deterministic random draws: a counter-based stream for mode-keyed samples
// plus a small sequential generator. Both are fully specified here so that
// fixed seeds reproduce byte-identical artifacts across platforms.
#pragma once

#include <cmath>
#include <cstdint>

namespace pvwave {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double u64_to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Sequential generator: splitmix64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  double uniform() { return u64_to_unit(next_u64()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one value per call, the partner draw is discarded to keep the
  // stream position independent of consumption pattern.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::uint64_t state_;
};

// Gaussian keyed by (seed, tags...): the draw for a given mode identity does
// not depend on cutoff or enumeration order, so refining a basis extends a
// random field instead of reshuffling it. Probed constants stay comparable
// across cutoff sweeps because of this.
inline double keyed_normal(std::uint64_t seed, std::uint64_t tag0, std::uint64_t tag1,
                           std::uint64_t tag2, std::uint64_t tag3) {
  std::uint64_t h = seed;
  h = splitmix64(h ^ (0x100000001b3ull * tag0));
  h = splitmix64(h ^ (0x100000001b3ull * tag1));
  h = splitmix64(h ^ (0x100000001b3ull * tag2));
  h = splitmix64(h ^ (0x100000001b3ull * tag3));
  double u1 = u64_to_unit(h);
  double u2 = u64_to_unit(splitmix64(h));
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace pvwave
