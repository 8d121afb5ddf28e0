#include "boltzwave/verifiers.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "boltzwave/parallel.hpp"
#include "boltzwave/rng.hpp"

namespace boltzwave {

namespace {

/// m = |vb|_inf / (1 - |vb|_inf), so eta^{-1} = 1 + m^2.
double stretch(const BarVelocity& vb) {
  const double m = norm_inf(vb.c);
  return m / (1.0 - m);
}

/// Composite cell average robust to the max-norm kinks inside a cell:
/// 2x2x2 subdivision, Gauss `order` per axis per sub-box.
double cell_average(const Box3& box, int order,
                    const std::function<double(const BarVelocity&)>& f) {
  double total = 0.0;
  for (int sx = 0; sx < 2; ++sx)
    for (int sy = 0; sy < 2; ++sy)
      for (int sz = 0; sz < 2; ++sz) {
        Box3 sub;
        const int s[3] = {sx, sy, sz};
        for (int d = 0; d < 3; ++d) {
          const double mid = 0.5 * (box.lo[d] + box.hi[d]);
          sub.lo[d] = s[d] == 0 ? box.lo[d] : mid;
          sub.hi[d] = s[d] == 0 ? mid : box.hi[d];
        }
        total += integrate_box(order, sub, [&](const Vec3& p) { return f(BarVelocity{p}); });
      }
  return total / box.volume();
}

/// Inclusive per-axis sample grid; endpoints are included so that suprema of
/// monotone-radial functions are attained exactly.
std::vector<double> inclusive_grid(double lo, double hi, int count) {
  std::vector<double> xs(count);
  for (int i = 0; i < count; ++i)
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  return xs;
}

}  // namespace

Assumption1Report verify_assumption1(const FilteredBasis& basis, std::uint64_t samples,
                                     std::uint64_t seed, double tol, int threads) {
  Assumption1Report report;
  report.samples = samples;

  // P_N chi_{(-1,1)^3} = chi_{(-zeta,zeta)^3}: project the constant 1 and
  // check the reconstruction is exactly 1 on kept cells, 0 outside.
  const auto coeffs = basis.project([](const BarVelocity&) { return 1.0; }, 4);
  const double expected = basis.amplitude() * basis.cell_volume();
  bool identity_ok = true;
  for (double c : coeffs) identity_ok = identity_ok && std::abs(c - expected) < 1e-12;
  {
    Rng rng(seed ^ 0xABCDEF);
    const double zeta = basis.zeta();
    for (int i = 0; i < 1000 && identity_ok; ++i) {
      const BarVelocity inside{{rng.uniform(-zeta, zeta), rng.uniform(-zeta, zeta),
                                rng.uniform(-zeta, zeta)}};
      identity_ok = std::abs(basis.reconstruct(coeffs, inside) - 1.0) < 1e-12;
      BarVelocity outside{{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), zeta +
                           rng.uniform(0.0, 1.0 - zeta)}};
      if (norm_inf(outside.c) > zeta)
        identity_ok = identity_ok && basis.reconstruct(coeffs, outside) == 0.0;
    }
  }
  report.projection_identity_ok = identity_ok;

  const double box = basis.v_box_halfwidth();
  auto kappa2 = [box](const Velocity& w) {
    return norm_inf(w.c) <= box ? 1.0 + norm2_sq(w.c) : 0.0;
  };
  auto kappa_inf = [box](const Velocity& w) {
    const double m = norm_inf(w.c);
    return m <= box ? 1.0 + m * m : 0.0;
  };

  report.max_defect = -1e300;
  report.max_defect_maxnorm = -1e300;
  std::mutex mtx;
  parallel_chunks(static_cast<std::size_t>(samples), threads,
                  [&](std::size_t begin, std::size_t end) {
    double local_max = -1e300, local_max_inf = -1e300;
    Velocity wv{}, wvs{};
    Vec3 wsig{};
    for (std::size_t i = begin; i < end; ++i) {
      // Per-sample stream: the sampled set is independent of the chunking.
      Rng rng = Rng::stream(seed, i);
      const Velocity v{{rng.uniform(-box, box), rng.uniform(-box, box), rng.uniform(-box, box)}};
      const Velocity vs{{rng.uniform(-box, box), rng.uniform(-box, box), rng.uniform(-box, box)}};
      const Vec3 sigma = rng.unit_sphere();
      const auto [v1, v2] = post_collision(v, vs, sigma);
      const double defect = kappa2(v2) + kappa2(v1) - kappa2(v) - kappa2(vs);
      if (defect > local_max) {
        local_max = defect;
        wv = v;
        wvs = vs;
        wsig = sigma;
      }
      local_max_inf = std::max(local_max_inf,
                               kappa_inf(v2) + kappa_inf(v1) - kappa_inf(v) - kappa_inf(vs));
    }
    std::lock_guard<std::mutex> lock(mtx);
    if (local_max > report.max_defect) {
      report.max_defect = local_max;
      report.worst_v = wv;
      report.worst_vs = wvs;
      report.worst_sigma = wsig;
    }
    report.max_defect_maxnorm = std::max(report.max_defect_maxnorm, local_max_inf);
  });

  report.pass = report.projection_identity_ok && report.max_defect <= tol;
  return report;
}

Assumption2Report verify_assumption2(const FilteredBasis& basis, double s, int samples_per_axis,
                                     int quad_order, int threads) {
  Assumption2Report report;
  report.s = s;
  report.bound_high = std::pow(3.0, std::abs(s));
  report.bound_low = 1.0 / report.bound_high;
  report.min_ratio = 1e300;
  report.max_ratio = -1e300;

  auto weight = [s](const BarVelocity& vb) { return std::pow(1.0 - norm_inf(vb.c), s); };

  std::mutex mtx;
  parallel_chunks(basis.size(), threads, [&](std::size_t begin, std::size_t end) {
    double lo = 1e300, hi = -1e300;
    BarVelocity at_lo{}, at_hi{};
    for (std::size_t k = begin; k < end; ++k) {
      const Box3 box = basis.bar_cell(k).box();
      const double avg = cell_average(box, quad_order, weight);
      const auto xs = inclusive_grid(box.lo[0], box.hi[0], samples_per_axis);
      const auto ys = inclusive_grid(box.lo[1], box.hi[1], samples_per_axis);
      const auto zs = inclusive_grid(box.lo[2], box.hi[2], samples_per_axis);
      for (double x : xs)
        for (double y : ys)
          for (double z : zs) {
            const BarVelocity vb{{x, y, z}};
            const double r = avg / weight(vb);
            if (r < lo) {
              lo = r;
              at_lo = vb;
            }
            if (r > hi) {
              hi = r;
              at_hi = vb;
            }
          }
    }
    std::lock_guard<std::mutex> lock(mtx);
    if (lo < report.min_ratio) {
      report.min_ratio = lo;
      report.worst_low = at_lo;
    }
    if (hi > report.max_ratio) {
      report.max_ratio = hi;
      report.worst_high = at_hi;
    }
  });

  // Quadrature-level slack: s = 0 must pass with ratio exactly 1.
  report.pass = report.min_ratio >= report.bound_low * (1.0 - 1e-12) &&
                report.max_ratio <= report.bound_high * (1.0 + 1e-12);
  return report;
}

Assumption3Report verify_assumption3(const FilteredBasis& basis, int n, int samples_per_axis,
                                     int quad_order, int threads) {
  Assumption3Report report;
  report.n = n;

  const int level = basis.level();
  const double delta = basis.filter().delta;
  const double two1mN = std::ldexp(1.0, 1 - level);
  report.interior_term =
      two1mN * 2.0 * n * std::pow(delta, 2 * n - 1) / std::pow(1.0 - delta, 2 * n + 1);
  const double c = std::ldexp(1.0, -level) / (1.0 - std::ldexp(1.0, -level));
  report.central_term = std::pow(c, 2 * n);
  report.printed_bound = report.interior_term + report.central_term;

  auto weight = [n](const BarVelocity& vb) {
    const double m = stretch(vb);
    return std::pow(1.0 + m * m, n);
  };

  std::mutex mtx;
  parallel_chunks(basis.size(), threads, [&](std::size_t begin, std::size_t end) {
    double worst = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const Box3 box = basis.bar_cell(k).box();
      const double avg = cell_average(box, quad_order, weight);
      const auto xs = inclusive_grid(box.lo[0], box.hi[0], samples_per_axis);
      const auto ys = inclusive_grid(box.lo[1], box.hi[1], samples_per_axis);
      const auto zs = inclusive_grid(box.lo[2], box.hi[2], samples_per_axis);
      for (double x : xs)
        for (double y : ys)
          for (double z : zs)
            worst = std::max(worst, std::abs(weight(BarVelocity{{x, y, z}}) - avg));
    }
    std::lock_guard<std::mutex> lock(mtx);
    report.measured_eps = std::max(report.measured_eps, worst);
  });
  return report;
}

Assumption4Report verify_assumption4(const FilteredBasis& basis, double a, double q,
                                     int samples_per_axis, int quad_order, int threads) {
  Assumption4Report report;
  report.a = a;
  report.q = q;

  auto weight = [a, q](const BarVelocity& vb) {
    const double m = stretch(vb);
    return std::exp(a * std::pow(m * m, q)) / (1.0 + m * m);
  };

  std::mutex mtx;
  parallel_chunks(basis.size(), threads, [&](std::size_t begin, std::size_t end) {
    double worst = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const Box3 box = basis.bar_cell(k).box();
      const double avg = cell_average(box, quad_order, weight);
      const auto xs = inclusive_grid(box.lo[0], box.hi[0], samples_per_axis);
      const auto ys = inclusive_grid(box.lo[1], box.hi[1], samples_per_axis);
      const auto zs = inclusive_grid(box.lo[2], box.hi[2], samples_per_axis);
      double wmin = 1e300;
      for (double x : xs)
        for (double y : ys)
          for (double z : zs) wmin = std::min(wmin, weight(BarVelocity{{x, y, z}}));
      worst = std::max(worst, avg / wmin);
    }
    std::lock_guard<std::mutex> lock(mtx);
    report.kbar = std::max(report.kbar, worst);
  });
  report.finite = std::isfinite(report.kbar) && report.kbar > 0.0;
  return report;
}

}  // namespace boltzwave
