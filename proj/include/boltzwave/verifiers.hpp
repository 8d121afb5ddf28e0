#pragma once

#include <cstdint>

#include "boltzwave/haar_basis.hpp"
#include "boltzwave/kernel.hpp"

namespace boltzwave {

/// Energy-preservation check. Confirms that the filtered projection maps the
/// cube indicator to the kept-box indicator, then samples collision
/// quadruples with v, v* in the kept region and checks the sign condition
///   k(v'*) + k(v') - k(v) - k(v*) <= 0
/// for the box-truncated energy weight k(w) = (1 + |w|_2^2) chi_box(w).
///
/// The Euclidean quadratic is used: both post-collision velocities inside the
/// box give defect exactly 0 (elastic energy conservation) and any escape
/// only removes nonnegative terms. The max-norm variant printed alongside is
/// informational; it admits strictly positive defects (rotate a diagonal pair
/// onto an axis) and therefore cannot satisfy the sign condition pointwise.
struct Assumption1Report {
  bool projection_identity_ok = false;
  double max_defect = 0.0;
  double max_defect_maxnorm = 0.0;  // informational, see above
  Velocity worst_v{}, worst_vs{};
  Vec3 worst_sigma{};
  std::uint64_t samples = 0;
  bool pass = false;
};

Assumption1Report verify_assumption1(const FilteredBasis& basis, std::uint64_t samples,
                                     std::uint64_t seed, double tol = 1e-12, int threads = 1);

/// Coercivity sandwich: r(vb) = P_N((1-|vb|)^s) / (1-|vb|)^s must lie within
/// [3^{-|s|}, 3^{|s|}] on the kept region.
struct Assumption2Report {
  double s = 0.0;
  double bound_low = 0.0, bound_high = 0.0;
  double min_ratio = 0.0, max_ratio = 0.0;
  BarVelocity worst_low{}, worst_high{};
  bool pass = false;
};

Assumption2Report verify_assumption2(const FilteredBasis& basis, double s,
                                     int samples_per_axis = 9, int quad_order = 6,
                                     int threads = 1);

/// Polynomial-moment filter error: measured eps = sup over the kept region of
/// |eta^{-n} - P_N(eta^{-n})| with eta^{-1}(vb) = 1 + (|vb|/(1-|vb|))^2 (max
/// norm), against the printed bound
///   2^{1-N} * 2n * Delta^{2n-1} / (1-Delta)^{2n+1}  +  (2^{-N}/(1-2^{-N}))^{2n}.
/// Report only; callers compare.
struct Assumption3Report {
  int n = 0;
  double measured_eps = 0.0;
  double interior_term = 0.0;
  double central_term = 0.0;
  double printed_bound = 0.0;
};

Assumption3Report verify_assumption3(const FilteredBasis& basis, int n,
                                     int samples_per_axis = 9, int quad_order = 6,
                                     int threads = 1);

/// Exponential-weight domination: smallest feasible Kbar with
/// P_N W <= Kbar * W on the kept region, for the proof's weight
/// W(vb) = eta(vb) * exp(a * (|vb|/(1-|vb|))^{2q}). Report only.
struct Assumption4Report {
  double a = 0.0, q = 0.0;
  double kbar = 0.0;
  bool finite = false;
};

Assumption4Report verify_assumption4(const FilteredBasis& basis, double a, double q,
                                     int samples_per_axis = 9, int quad_order = 6,
                                     int threads = 1);

}  // namespace boltzwave
