#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "boltzwave/haar_basis.hpp"
#include "boltzwave/spectral_solver.hpp"

namespace boltzwave {

/// Maxwellian M(rho,u,T)(v) = rho (2 pi T)^{-3/2} exp(-|u-v|^2 / (2T)),
/// Euclidean, plus the closed-form box moments the tail corrections need.
struct Maxwellian {
  double rho = 0.0;
  Vec3 u{};
  double temperature = 0.0;

  double eval(const Velocity& v) const;
  /// int_box M dv over an axis-aligned box.
  double mass_in_box(const Vec3& lo, const Vec3& hi) const;
  /// int_box M |v|_2^2 dv.
  double energy_in_box(const Vec3& lo, const Vec3& hi) const;
  double total_mass() const { return rho; }
  double total_energy() const { return rho * (norm2_sq(u) + 3.0 * temperature); }
};

/// u = momentum / mass, T = (energy/mass - |u|^2) / 3.
/// Throws NumericalError on mass <= 0 or T <= 0.
Maxwellian maxwellian_from_moments(double mass, const Vec3& momentum, double energy);

/// Precomputed pairing integrals: for each registered weight w,
///   W_w[k] = A * int_cell w(phi_inv(vb)) * <phi_inv(vb)>^{-2} * J(vb) dvb,
/// so that sum_k a_k W_w[k] = int f_N(v) w(v) dv exactly.
class WeightTable {
 public:
  using WeightFn = std::function<double(const Velocity&)>;

  WeightTable(const FilteredBasis& basis, int quad_order = 6, int threads = 1);

  void register_weight(const std::string& name, const WeightFn& w);
  bool has(const std::string& name) const { return columns_.count(name) != 0; }
  const std::vector<double>& column(const std::string& name) const;

  double pair(const std::string& name, const std::vector<double>& a) const;

  const FilteredBasis& basis() const { return basis_; }
  int quad_order() const { return quad_order_; }

  /// Cell integrals backing the closed-form L2 / entropy evaluations:
  /// q2[k] = int_cell <v>^{-2} J,  q4[k] = int_cell <v>^{-4} J,
  /// qlog[k] = int_cell <v>^{-2} log(<v>^2) J  (all with v = phi_inv(vb)).
  const std::vector<double>& q2() const { return q2_; }
  const std::vector<double>& q4() const { return q4_; }
  const std::vector<double>& qlog() const { return qlog_; }

 private:
  const FilteredBasis& basis_;
  int quad_order_;
  int threads_;
  std::map<std::string, std::vector<double>> columns_;
  std::vector<double> q2_, q4_, qlog_;
};

/// One row of monitored quantities. Column order mirrors the CSV schema.
struct DiagnosticsRecord {
  double t = 0.0;
  double mass = 0.0;
  Vec3 momentum{};
  double energy = 0.0;  // int f |v|_2^2 dv
  double m4 = 0.0;
  double m6 = 0.0;
  double expmom = 0.0;
  double l2 = 0.0;
  double entropy = 0.0;  // int f log f dv, 0 log 0 = 0
  double dist_eq = 0.0;  // L^1_2 distance to the moment-matched Maxwellian
  double min_cell = 0.0;
  double dropped_mass = 0.0;
};

struct DiagnosticsOptions {
  double exp_a = 0.1;  // exponential-moment weight exp(a |v|_2^s)
  double exp_s = 0.5;
  int dist_quad_order = 4;
  double dropped_mass_echo = 0.0;
};

/// Registers the default weights (1, v_i, |v|^2, |v|^4, |v|^6, exp moment).
void register_default_weights(WeightTable& table, const DiagnosticsOptions& opts);

/// All linear functionals by coefficient pairing; entropy/L2 by per-cell
/// closed forms; distance to equilibrium against the fitted Maxwellian
/// restricted to the kept box plus its analytic outside-box tail.
DiagnosticsRecord record(const SpectralState& state, const WeightTable& table,
                         const DiagnosticsOptions& opts);

struct RateFit {
  double c = 0.0;        // decay rate: distance ~ exp(-c t)
  double quality = 0.0;  // coefficient of determination of the log-linear fit
};

/// Least-squares slope of log(distance) vs t. Requires >= 5 samples with
/// positive distances (the caller excludes the transient window).
RateFit equilibrium_rate_fit(const std::vector<std::pair<double, double>>& series);

struct LowerBoundFit {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Best truncated-Maxwellian lower bound f_N(v) >= C1 exp(-C2 |v|_2^2) on the
/// kept region: for each C2 in the grid, C1 is the min over kept cells of
/// (cell-min f_N) / exp(-C2 |v_far|^2); reports the pair maximizing C1.
LowerBoundFit lower_bound_fit(const SpectralState& state, const FilteredBasis& basis,
                              const std::vector<double>& c2_grid);

}  // namespace boltzwave
