#pragma once

#include <optional>
#include <utility>

#include "boltzwave/rng.hpp"
#include "boltzwave/velocity_map.hpp"

namespace boltzwave {

/// Hard-potential cutoff collision kernel B = |u|^gamma * b(cos theta) with
/// b = b0 on the angular band theta_b <= theta <= pi - theta_b and 0 outside.
/// An optional lambda truncates the relative speed: |u ^ lambda|^gamma.
struct KernelSpec {
  double gamma = 0.5;
  double theta_b = 0.52359877559829887308;  // pi/6
  double b0 = 1.0;
  std::optional<double> lambda;

  /// b0 making int_{S^2} b dsigma = 1, i.e. 1 / (4 pi cos theta_b).
  static double normalized_b0(double theta_b);
  static KernelSpec normalized(double gamma, double theta_b,
                               std::optional<double> lambda = std::nullopt);

  void validate() const;
};

/// Elastic post-collision pair in the sigma-representation:
///   v' = (v+v*)/2 + sigma |v-v*|/2,  v'* = (v+v*)/2 - sigma |v-v*|/2.
/// Momentum and Euclidean energy are conserved to roundoff.
std::pair<Velocity, Velocity> post_collision(const Velocity& v, const Velocity& vs,
                                             const Vec3& sigma);

/// B evaluated at a collision triple. Returns 0 for v == vs (measure-zero
/// convention) and outside the angular band.
double kernel_eval(const KernelSpec& spec, const Velocity& v, const Velocity& vs,
                   const Vec3& sigma);

/// Uniform direction on S^2; callers attach the Monte-Carlo weight 4*pi.
Vec3 sample_sigma(Rng& rng);

}  // namespace boltzwave
