#pragma once

#include "boltzwave/errors.hpp"
#include "boltzwave/vec3.hpp"

namespace boltzwave {

/// A point of physical velocity space R^3.
struct Velocity {
  Vec3 c;
};

/// A point of the computational cube (-1,1)^3, i.e. the image of a
/// physical velocity under the compactifying map. Max norm strictly < 1.
struct BarVelocity {
  Vec3 c;
};

/// phi(v) = v / (1 + |v|_inf). Total on R^3, maps onto (-1,1)^3.
inline BarVelocity phi(const Velocity& v) {
  const double m = norm_inf(v.c);
  return BarVelocity{v.c / (1.0 + m)};
}

/// phi^{-1}(vb) = vb / (1 - |vb|_inf). Throws on |vb|_inf >= 1.
inline Velocity phi_inv(const BarVelocity& vb) {
  const double m = norm_inf(vb.c);
  if (m >= 1.0) throw NumericalError("phi_inv: point outside (-1,1)^3 (max norm >= 1)");
  return Velocity{vb.c / (1.0 - m)};
}

/// Jacobian factor (1 - |vb|_inf)^{-4} = (1 + |v|_inf)^4 for v = phi_inv(vb).
/// Rewrites any integral over R^3 as a bar-space integral:
///   int g(v) dv = int g(phi_inv(vb)) * jacobian_factor(vb) dvb.
inline double jacobian_factor(const BarVelocity& vb) {
  const double m = norm_inf(vb.c);
  if (m >= 1.0) throw NumericalError("jacobian_factor: point on or outside the cube boundary");
  const double t = 1.0 - m;
  const double t2 = t * t;
  return 1.0 / (t2 * t2);
}

/// <w>^2 with the max norm: 1 + |w|_inf^2. This is the weight the spectral
/// coefficients carry; reconstruction divides it back out.
inline double bracket_sq(const Velocity& v) {
  const double m = norm_inf(v.c);
  return 1.0 + m * m;
}

}  // namespace boltzwave
