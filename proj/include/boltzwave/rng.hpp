#pragma once

#include <cstdint>

#include "boltzwave/vec3.hpp"

namespace boltzwave {

/// SplitMix64 mixing step. Used both as the per-stream generator and as the
/// hash that derives independent per-pair streams from (seed, pair index),
/// so builds are reproducible regardless of thread count.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic 64-bit generator with an explicit, portable real mapping.
/// std::uniform_real_distribution is avoided on purpose: its output is
/// implementation-defined and would break byte-identical cache reruns.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Independent stream for sub-task `index` of a build seeded with `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ (0x5851f42d4c957f2dULL * (index + 1));
    splitmix64(s);
    splitmix64(s);
    return Rng(s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform direction on the unit sphere (area measure).
  Vec3 unit_sphere() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 6.283185307179586476925286766559);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }

 private:
  std::uint64_t state_;
};

}  // namespace boltzwave
