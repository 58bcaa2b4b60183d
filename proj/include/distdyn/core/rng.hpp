#pragma once

#include <cstdint>
#include <cmath>
#include <limits>

namespace distdyn {

// Deterministic RNG used everywhere in the library. We avoid the standard
// distributions because their sequences are implementation-defined; results
// must be bit-reproducible for a given seed regardless of toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds diverge immediately.
    next_u64();
    next_u64();
  }

  // splitmix64 step: full 64-bit period, passes standard statistical tests.
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Multiply-shift rejection-free mapping; bias is < 2^-64 per draw.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // +1 or -1 with equal probability.
  int rademacher() { return (next_u64() & 1u) ? 1 : -1; }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Guard against log(0).
    if (u1 <= 0.0) u1 = std::numeric_limits<double>::min();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stateless counter-based stream: one value per (seed, a, b, c) tuple.
// Bootstrap replicates use this so every (component, time, replicate) cell
// is reproducible independently of iteration order.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a,
                                  std::uint64_t b, std::uint64_t c) {
  std::uint64_t z = seed;
  auto mix = [&z](std::uint64_t v) {
    z ^= v + 0x9e3779b97f4a7c15ULL + (z << 6) + (z >> 2);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
  };
  mix(a);
  mix(b);
  mix(c);
  return z;
}

}  // namespace distdyn
