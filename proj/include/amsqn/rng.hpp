#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace amsqn {

/// Portable deterministic RNG: mt19937_64 (bit-exact per the standard) with
/// hand-rolled uniform/normal conversions, so generated instances are
/// reproducible across platforms and standard libraries. Independent streams
/// are derived from (seed, stream tag) via splitmix64.
class Rng {
public:
  enum Stream : std::uint64_t {
    kMatrix = 1,
    kLabels = 2,
    kNoise = 3,
    kPlanted = 4,
    kInit = 5,
  };

  Rng(std::uint64_t seed, Stream stream) : eng_(mix(seed, static_cast<std::uint64_t>(stream))) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (deterministic, no library distribution).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t bounded(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = eng_();
      if (x >= threshold) return x % bound;
    }
  }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace amsqn
