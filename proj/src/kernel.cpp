#include "boltzwave/kernel.hpp"

#include <cmath>
#include <string>

#include "boltzwave/errors.hpp"

namespace boltzwave {

double KernelSpec::normalized_b0(double theta_b) {
  return 1.0 / (4.0 * M_PI * std::cos(theta_b));
}

KernelSpec KernelSpec::normalized(double gamma, double theta_b, std::optional<double> lambda) {
  KernelSpec spec;
  spec.gamma = gamma;
  spec.theta_b = theta_b;
  spec.b0 = normalized_b0(theta_b);
  spec.lambda = lambda;
  spec.validate();
  return spec;
}

void KernelSpec::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("kernel.gamma must lie in (0,1), got " + std::to_string(gamma));
  if (!(theta_b > 0.0 && theta_b < M_PI / 2.0))
    throw ConfigError("kernel.theta_b must lie in (0, pi/2), got " + std::to_string(theta_b));
  if (b0 < 0.0) throw ConfigError("kernel.b0 must be nonnegative");
  if (lambda && !(*lambda > 0.0)) throw ConfigError("kernel.lambda must be positive when set");
}

std::pair<Velocity, Velocity> post_collision(const Velocity& v, const Velocity& vs,
                                             const Vec3& sigma) {
  const Vec3 center = (v.c + vs.c) * 0.5;
  const Vec3 offset = sigma * (0.5 * norm2(v.c - vs.c));
  return {Velocity{center + offset}, Velocity{center - offset}};
}

double kernel_eval(const KernelSpec& spec, const Velocity& v, const Velocity& vs,
                   const Vec3& sigma) {
  const Vec3 u = v.c - vs.c;
  const double r = norm2(u);
  if (r == 0.0) return 0.0;
  // Angular band theta_b <= theta <= pi - theta_b, i.e. |cos theta| <= cos theta_b.
  const double cos_theta = dot(sigma, u) / r;
  if (std::abs(cos_theta) > std::cos(spec.theta_b)) return 0.0;
  const double reff = spec.lambda ? std::min(r, *spec.lambda) : r;
  // gamma = 1/2 is the common hard-potential case and sits on the hot path.
  return (spec.gamma == 0.5 ? std::sqrt(reff) : std::pow(reff, spec.gamma)) * spec.b0;
}

Vec3 sample_sigma(Rng& rng) { return rng.unit_sphere(); }

}  // namespace boltzwave
