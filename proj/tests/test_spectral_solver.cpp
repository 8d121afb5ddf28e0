#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "boltzwave/collision_tensor.hpp"
#include "boltzwave/diagnostics.hpp"
#include "boltzwave/errors.hpp"
#include "boltzwave/spectral_solver.hpp"

using namespace boltzwave;

namespace {

double norm2_vec(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

CollisionTensors empty_gain_loss(std::size_t n) {
  CollisionTensors t;
  t.loss.n = n;
  t.loss.m.assign(n * n, 0.0);
  t.gain.row_offset.assign(n + 1, 0);
  return t;
}

}  // namespace

TEST_CASE("init_from_f0: projected Maxwellian coefficients are nonnegative") {
  FilteredBasis basis(3, 0.9);
  InitialCondition ic;
  ic.bumps = {GaussianBump{1.0, {0, 0, 0}, 1.0}};
  const SpectralState s = init_from_f0(ic, basis, 6);
  CHECK(s.t == 0.0);
  CHECK(s.a.size() == basis.size());
  for (double a : s.a) CHECK(a >= 0.0);
  double max_a = 0.0;
  for (double a : s.a) max_a = std::max(max_a, a);
  CHECK(max_a > 0.0);
}

TEST_CASE("init_from_f0 validates bumps") {
  FilteredBasis basis(2, 0.75);
  InitialCondition bad;
  CHECK_THROWS_AS(init_from_f0(bad, basis), ConfigError);
  bad.bumps = {GaussianBump{1.0, {0, 0, 0}, -1.0}};
  CHECK_THROWS_AS(init_from_f0(bad, basis), ConfigError);
  bad.bumps = {GaussianBump{0.0, {0, 0, 0}, 1.0}};
  CHECK_THROWS_AS(init_from_f0(bad, basis), ConfigError);
}

TEST_CASE("projected Maxwellian mass is within 5% at N=4, delta=0.9") {
  FilteredBasis basis(4, 0.9);
  InitialCondition ic;
  ic.bumps = {GaussianBump{1.0, {0, 0, 0}, 1.0}};
  const SpectralState s = init_from_f0(ic, basis, 8, 2);
  WeightTable table(basis, 6, 2);
  register_default_weights(table, DiagnosticsOptions{});
  const double mass = table.pair("one", s.a);
  CHECK(mass == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("rhs is quadratic: zero at zero, scales as c^2") {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  const CollisionTensors t = build(basis, spec, 100, 21, BuildOptions{});

  SpectralState zero;
  zero.a.assign(basis.size(), 0.0);
  for (double d : rhs(zero, t.gain, t.loss)) CHECK(d == 0.0);

  SpectralState s;
  s.a.resize(basis.size());
  Rng rng(3);
  for (double& a : s.a) a = rng.uniform(0.0, 1.0);
  const auto base = rhs(s, t.gain, t.loss);
  SpectralState scaled = s;
  for (double& a : scaled.a) a *= 3.0;
  const auto big = rhs(scaled, t.gain, t.loss);
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(big[i] == doctest::Approx(9.0 * base[i]).epsilon(1e-12));
}

TEST_CASE("near-equilibrium residual is small next to a two-bump state") {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  OracleOptions oq;
  oq.loss_order = 3;
  oq.loss_subdiv = 1;
  oq.gain_order = 3;
  oq.n_sigma = 64;
  oq.threads = 2;
  const CollisionTensors t = oracle_build(basis, spec, oq);

  InitialCondition maxw;
  maxw.bumps = {GaussianBump{1.0, {0, 0, 0}, 1.0}};
  const SpectralState se = init_from_f0(maxw, basis, 8);

  // Two opposed bumps with the same total mass and energy: rho (u^2 + 3T)
  // matches 1 * (0 + 3*1.0).
  InitialCondition bump2;
  bump2.bumps = {GaussianBump{0.5, {1.5, 0, 0}, 1.0 - 2.25 / 3.0},
                 GaussianBump{0.5, {-1.5, 0, 0}, 1.0 - 2.25 / 3.0}};
  const SpectralState sb = init_from_f0(bump2, basis, 8);

  const double re = norm2_vec(rhs(se, t.gain, t.loss));
  const double rb = norm2_vec(rhs(sb, t.gain, t.loss));
  CHECK(re < 0.5 * rb);
}

TEST_CASE("forward Euler with pure loss decays monotonically") {
  CollisionTensors t = empty_gain_loss(2);
  t.loss.m = {0.8, 0.0, 0.0, 1.2};  // rate_k = L[k][k] * a_k here
  SpectralState s;
  s.a = {1.0, 2.0};
  s.t = 0.0;
  double prev0 = s.a[0], prev1 = s.a[1];
  for (int i = 0; i < 50; ++i) {
    s = step(s, 0.05, TimeMethod::forward_euler, t.gain, t.loss);
    CHECK(s.a[0] < prev0);
    CHECK(s.a[1] < prev1);
    CHECK(s.a[0] > 0.0);
    CHECK(s.a[1] > 0.0);
    prev0 = s.a[0];
    prev1 = s.a[1];
  }
}

TEST_CASE("RK4 self-difference beats Euler by 10x on a smooth run") {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  OracleOptions oq;
  oq.loss_order = 3;
  oq.loss_subdiv = 1;
  oq.gain_order = 3;
  oq.n_sigma = 32;
  oq.threads = 2;
  const CollisionTensors t = oracle_build(basis, spec, oq);

  InitialCondition ic;
  ic.bumps = {GaussianBump{0.5, {0.8, 0, 0}, 0.3}, GaussianBump{0.5, {-0.8, 0, 0}, 0.3}};
  const SpectralState s0 = init_from_f0(ic, basis, 6);

  const double t_end = 0.5 / max_loss_rate(s0, t.loss) * 4.0;
  auto integrate = [&](TimeMethod method, int steps) {
    SpectralState s = s0;
    const double dt = t_end / steps;
    for (int i = 0; i < steps; ++i) s = step(s, dt, method, t.gain, t.loss);
    return s;
  };
  auto diff = [](const SpectralState& a, const SpectralState& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.a.size(); ++i) d += (a.a[i] - b.a[i]) * (a.a[i] - b.a[i]);
    return std::sqrt(d);
  };
  const double rk_d = diff(integrate(TimeMethod::rk4, 8), integrate(TimeMethod::rk4, 16));
  const double eu_d =
      diff(integrate(TimeMethod::forward_euler, 8), integrate(TimeMethod::forward_euler, 16));
  CHECK(rk_d * 10.0 <= eu_d);
}

TEST_CASE("reconstruct: single coefficient and filter support") {
  FilteredBasis basis(2, 0.75);
  SpectralState s;
  s.a.assign(basis.size(), 0.0);
  const std::size_t k0 = basis.flat_of({1, 0, 0});
  s.a[k0] = 1.0;
  // v = (1, 0, 0) maps to vb = (0.5, 0, 0), inside cell (1,0,0).
  const Velocity v{{1, 0, 0}};
  CHECK(reconstruct(s, basis, v) ==
        doctest::Approx(std::pow(2.0, 1.5) / 2.0).epsilon(1e-14));
  // Outside the kept region (|vb| > 0.75 needs |v|_inf > 3).
  CHECK(reconstruct(s, basis, Velocity{{5, 0, 0}}) == 0.0);
  CHECK(reconstruct(s, basis, Velocity{{0.1, 0, 0}}) == 0.0);
}

TEST_CASE("run: t_end = 0 emits exactly one observation") {
  CollisionTensors t = empty_gain_loss(2);
  SpectralState s0;
  s0.a = {1.0, 1.0};
  SolverConfig cfg;
  cfg.t_end = 0.0;
  cfg.dt = 0.1;
  int count = 0;
  const RunResult r = run(s0, t.gain, t.loss, cfg, [&](const SpectralState&) { ++count; });
  CHECK(count == 1);
  CHECK(r.steps == 0);
  CHECK(r.final_state.a == s0.a);
}

TEST_CASE("run: determinism") {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  const CollisionTensors t = build(basis, spec, 80, 55, BuildOptions{});
  InitialCondition ic;
  ic.bumps = {GaussianBump{1.0, {0.5, 0, 0}, 0.3}};
  const SpectralState s0 = init_from_f0(ic, basis, 6);
  SolverConfig cfg;
  cfg.t_end = 0.2;
  cfg.dt = 0.01;
  std::vector<std::vector<double>> first, second;
  run(s0, t.gain, t.loss, cfg, [&](const SpectralState& s) { first.push_back(s.a); });
  run(s0, t.gain, t.loss, cfg, [&](const SpectralState& s) { second.push_back(s.a); });
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i] == second[i]);
}

TEST_CASE("positivity guard: halving recovers, floor raises") {
  // Pure loss with a huge rate: Euler at dt*rate > 2 overshoots negative.
  CollisionTensors t = empty_gain_loss(1);
  SpectralState s0;
  s0.a = {1.0};

  SUBCASE("halving recovers") {
    t.loss.m = {30.0};  // rate = 30 at a=1
    SolverConfig cfg;
    cfg.method = TimeMethod::forward_euler;
    cfg.dt = 0.1;  // dt * rate = 3 -> negative first try
    cfg.t_end = 0.5;
    const RunResult r = run(s0, t.gain, t.loss, cfg, nullptr);
    CHECK(r.dt_halvings >= 1);
    CHECK(r.final_state.a[0] > 0.0);
  }
  SUBCASE("dt floor is an instability error") {
    t.loss.m = {1e7};
    SolverConfig cfg;
    cfg.method = TimeMethod::forward_euler;
    cfg.dt = 0.01;  // even dt/1024 overshoots
    cfg.t_end = 0.5;
    CHECK_THROWS_AS(run(s0, t.gain, t.loss, cfg, nullptr), NumericalError);
  }
  SUBCASE("halving disabled is an error immediately") {
    t.loss.m = {30.0};
    SolverConfig cfg;
    cfg.method = TimeMethod::forward_euler;
    cfg.dt = 0.1;
    cfg.t_end = 0.5;
    cfg.halve_dt_on_negative = false;
    CHECK_THROWS_AS(run(s0, t.gain, t.loss, cfg, nullptr), NumericalError);
  }
}
