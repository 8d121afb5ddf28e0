#include "boltzwave/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "boltzwave/errors.hpp"
#include "boltzwave/parallel.hpp"

namespace boltzwave {

namespace {

// One-dimensional Gaussian moments over [a, b] for N(mean, sd^2).
double gauss_mass_1d(double mean, double sd, double a, double b) {
  const double s = sd * M_SQRT2;
  return 0.5 * (std::erf((b - mean) / s) - std::erf((a - mean) / s));
}

double std_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); }

// int_a^b v^2 N(mean, sd^2) dv.
double gauss_second_moment_1d(double mean, double sd, double a, double b) {
  const double ta = (a - mean) / sd, tb = (b - mean) / sd;
  const double i0 = gauss_mass_1d(mean, sd, a, b);
  return (mean * mean + sd * sd) * i0 + sd * ((a + mean) * std_pdf(ta) - (b + mean) * std_pdf(tb));
}

}  // namespace

double Maxwellian::eval(const Velocity& v) const {
  const double d2 = norm2_sq(v.c - u);
  return rho * std::pow(2.0 * M_PI * temperature, -1.5) * std::exp(-d2 / (2.0 * temperature));
}

double Maxwellian::mass_in_box(const Vec3& lo, const Vec3& hi) const {
  const double sd = std::sqrt(temperature);
  double p = rho;
  for (int d = 0; d < 3; ++d) p *= gauss_mass_1d(u[d], sd, lo[d], hi[d]);
  return p;
}

double Maxwellian::energy_in_box(const Vec3& lo, const Vec3& hi) const {
  const double sd = std::sqrt(temperature);
  double i0[3], i2[3];
  for (int d = 0; d < 3; ++d) {
    i0[d] = gauss_mass_1d(u[d], sd, lo[d], hi[d]);
    i2[d] = gauss_second_moment_1d(u[d], sd, lo[d], hi[d]);
  }
  return rho * (i2[0] * i0[1] * i0[2] + i0[0] * i2[1] * i0[2] + i0[0] * i0[1] * i2[2]);
}

Maxwellian maxwellian_from_moments(double mass, const Vec3& momentum, double energy) {
  if (!(mass > 0.0)) throw NumericalError("maxwellian_from_moments: mass must be positive");
  Maxwellian m;
  m.rho = mass;
  m.u = momentum / mass;
  m.temperature = (energy / mass - norm2_sq(m.u)) / 3.0;
  if (!(m.temperature > 0.0))
    throw NumericalError("maxwellian_from_moments: nonpositive temperature " +
                         std::to_string(m.temperature));
  return m;
}

WeightTable::WeightTable(const FilteredBasis& basis, int quad_order, int threads)
    : basis_(basis), quad_order_(quad_order), threads_(threads) {
  const std::size_t n = basis.size();
  q2_.resize(n);
  q4_.resize(n);
  qlog_.resize(n);
  parallel_chunks(n, threads_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Box3 box = basis_.bar_cell(i).box();
      q2_[i] = integrate_box(quad_order_, box, [&](const Vec3& p) {
        const BarVelocity vb{p};
        return jacobian_factor(vb) / bracket_sq(phi_inv(vb));
      });
      q4_[i] = integrate_box(quad_order_, box, [&](const Vec3& p) {
        const BarVelocity vb{p};
        const double b = bracket_sq(phi_inv(vb));
        return jacobian_factor(vb) / (b * b);
      });
      qlog_[i] = integrate_box(quad_order_, box, [&](const Vec3& p) {
        const BarVelocity vb{p};
        const double b = bracket_sq(phi_inv(vb));
        return jacobian_factor(vb) * std::log(b) / b;
      });
    }
  });
}

void WeightTable::register_weight(const std::string& name, const WeightFn& w) {
  const std::size_t n = basis_.size();
  std::vector<double> col(n);
  const double amp = basis_.amplitude();
  parallel_chunks(n, threads_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Box3 box = basis_.bar_cell(i).box();
      col[i] = amp * integrate_box(quad_order_, box, [&](const Vec3& p) {
                 const BarVelocity vb{p};
                 const Velocity v = phi_inv(vb);
                 return w(v) * jacobian_factor(vb) / bracket_sq(v);
               });
    }
  });
  columns_[name] = std::move(col);
}

const std::vector<double>& WeightTable::column(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw ConfigError("weight table has no column '" + name + "'");
  return it->second;
}

double WeightTable::pair(const std::string& name, const std::vector<double>& a) const {
  const std::vector<double>& col = column(name);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * col[i];
  return sum;
}

void register_default_weights(WeightTable& table, const DiagnosticsOptions& opts) {
  table.register_weight("one", [](const Velocity&) { return 1.0; });
  table.register_weight("vx", [](const Velocity& v) { return v.c.x; });
  table.register_weight("vy", [](const Velocity& v) { return v.c.y; });
  table.register_weight("vz", [](const Velocity& v) { return v.c.z; });
  table.register_weight("e2", [](const Velocity& v) { return norm2_sq(v.c); });
  table.register_weight("m4", [](const Velocity& v) {
    const double e = norm2_sq(v.c);
    return e * e;
  });
  table.register_weight("m6", [](const Velocity& v) {
    const double e = norm2_sq(v.c);
    return e * e * e;
  });
  const double a = opts.exp_a, s = opts.exp_s;
  table.register_weight("expmom", [a, s](const Velocity& v) {
    return std::exp(a * std::pow(norm2(v.c), s));
  });
}

DiagnosticsRecord record(const SpectralState& state, const WeightTable& table,
                         const DiagnosticsOptions& opts) {
  const FilteredBasis& basis = table.basis();
  const double amp = basis.amplitude();
  DiagnosticsRecord rec;
  rec.t = state.t;
  rec.mass = table.pair("one", state.a);
  rec.momentum = {table.pair("vx", state.a), table.pair("vy", state.a),
                  table.pair("vz", state.a)};
  rec.energy = table.pair("e2", state.a);
  rec.m4 = table.pair("m4", state.a);
  rec.m6 = table.pair("m6", state.a);
  rec.expmom = table.pair("expmom", state.a);
  rec.dropped_mass = opts.dropped_mass_echo;

  // L2 and entropy have closed per-cell forms: f_N = A a_k <v>^{-2} on cell k.
  double l2sq = 0.0, entropy = 0.0;
  double min_cell = state.a.empty() ? 0.0 : state.a[0];
  for (std::size_t k = 0; k < state.a.size(); ++k) {
    const double ak = state.a[k];
    min_cell = std::min(min_cell, ak);
    const double fa = amp * ak;
    l2sq += fa * fa * table.q4()[k];
    if (fa > 0.0) entropy += fa * (std::log(fa) * table.q2()[k] - table.qlog()[k]);
  }
  rec.l2 = std::sqrt(std::max(0.0, l2sq));
  rec.entropy = entropy;
  rec.min_cell = min_cell;

  // Distance to the moment-matched Maxwellian in L^1_2, restricted to the
  // kept box plus the Maxwellian's analytic outside-box tail.
  if (rec.mass > 0.0 && rec.energy / rec.mass > norm2_sq(rec.momentum / rec.mass)) {
    const Maxwellian m = maxwellian_from_moments(rec.mass, rec.momentum, rec.energy);
    double dist = 0.0;
    for (std::size_t k = 0; k < state.a.size(); ++k) {
      const double fa = amp * state.a[k];
      const Box3 box = basis.bar_cell(k).box();
      dist += integrate_box(opts.dist_quad_order, box, [&](const Vec3& p) {
        const BarVelocity vb{p};
        const Velocity v = phi_inv(vb);
        const double fn = fa / bracket_sq(v);
        return std::abs(fn - m.eval(v)) * (1.0 + norm2_sq(v.c)) * jacobian_factor(vb);
      });
    }
    const double half = basis.v_box_halfwidth();
    const Vec3 lo{-half, -half, -half}, hi{half, half, half};
    const double tail = (m.total_mass() + m.total_energy()) -
                        (m.mass_in_box(lo, hi) + m.energy_in_box(lo, hi));
    rec.dist_eq = dist + std::max(0.0, tail);
  } else {
    rec.dist_eq = 0.0;
  }
  return rec;
}

RateFit equilibrium_rate_fit(const std::vector<std::pair<double, double>>& series) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, d] : series)
    if (d > 0.0) pts.emplace_back(t, std::log(d));
  if (pts.size() < 5)
    throw NumericalError("equilibrium_rate_fit: need >= 5 samples with positive distances, got " +
                         std::to_string(pts.size()));

  const double n = static_cast<double>(pts.size());
  double st = 0.0, sy = 0.0;
  for (const auto& [t, y] : pts) {
    st += t;
    sy += y;
  }
  const double mt = st / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [t, y] : pts) {
    sxx += (t - mt) * (t - mt);
    sxy += (t - mt) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0) throw NumericalError("equilibrium_rate_fit: degenerate time axis");

  RateFit fit;
  const double slope = sxy / sxx;
  fit.c = -slope;
  if (syy <= 1e-300) {
    fit.quality = 1.0;  // constant series is fit exactly
  } else {
    double ss_res = 0.0;
    const double intercept = my - slope * mt;
    for (const auto& [t, y] : pts) {
      const double r = y - (intercept + slope * t);
      ss_res += r * r;
    }
    fit.quality = 1.0 - ss_res / syy;
  }
  return fit;
}

LowerBoundFit lower_bound_fit(const SpectralState& state, const FilteredBasis& basis,
                              const std::vector<double>& c2_grid) {
  if (c2_grid.empty()) throw ConfigError("lower_bound_fit: empty C2 grid");
  const double amp = basis.amplitude();
  const std::size_t n = basis.size();

  // Per-cell minimum of f_N and squared Euclidean norm of the farthest point.
  std::vector<double> fmin(n), far2(n);
  bool vanished = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (state.a[k] <= 0.0) vanished = true;
    const CellGeometry geo = basis.bar_cell(k);
    Vec3 corner;
    for (int d = 0; d < 3; ++d)
      corner[d] = std::max(std::abs(geo.bar_lo[d]), std::abs(geo.bar_hi[d]));
    const Velocity vfar = phi_inv(BarVelocity{corner});
    far2[k] = norm2_sq(vfar.c);
    fmin[k] = amp * state.a[k] / bracket_sq(vfar);
  }
  if (vanished) return LowerBoundFit{0.0, c2_grid.front()};

  LowerBoundFit best{0.0, c2_grid.front()};
  for (const double c2 : c2_grid) {
    double c1 = 1e300;
    for (std::size_t k = 0; k < n; ++k) c1 = std::min(c1, fmin[k] * std::exp(c2 * far2[k]));
    if (c1 > best.c1) best = LowerBoundFit{c1, c2};
  }
  return best;
}

}  // namespace boltzwave
