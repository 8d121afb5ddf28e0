#include "boltzwave/spectral_solver.hpp"

#include <algorithm>
#include <cmath>

#include "boltzwave/errors.hpp"
#include "boltzwave/parallel.hpp"

namespace boltzwave {

double InitialCondition::eval(const Velocity& v) const {
  double sum = 0.0;
  for (const GaussianBump& b : bumps) {
    const double d2 = norm2_sq(v.c - b.u);
    sum += b.rho * std::pow(2.0 * M_PI * b.temperature, -1.5) *
           std::exp(-d2 / (2.0 * b.temperature));
  }
  return sum;
}

void InitialCondition::validate() const {
  if (bumps.empty()) throw ConfigError("initial condition needs at least one bump");
  double mass = 0.0;
  for (std::size_t i = 0; i < bumps.size(); ++i) {
    if (!(bumps[i].rho > 0.0))
      throw ConfigError("initial_condition[" + std::to_string(i) + "].rho must be > 0");
    if (!(bumps[i].temperature > 0.0))
      throw ConfigError("initial_condition[" + std::to_string(i) + "].T must be > 0");
    mass += bumps[i].rho;
  }
  if (!(mass > 0.0)) throw ConfigError("initial condition carries no mass");
}

SpectralState init_from_f0(const InitialCondition& f0, const FilteredBasis& basis,
                           int quad_order, int threads) {
  f0.validate();
  SpectralState state;
  state.t = 0.0;
  state.a = basis.project(
      [&](const BarVelocity& vb) {
        const Velocity v = phi_inv(vb);
        return f0.eval(v) * bracket_sq(v);
      },
      quad_order, threads);
  return state;
}

std::vector<double> rhs(const SpectralState& state, const GainTensor& gain,
                        const LossTensor& loss, int threads) {
  const std::size_t n = state.a.size();
  std::vector<double> da(n, 0.0);
  const double* a = state.a.data();
  parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      double g = 0.0;
      for (std::uint64_t i = gain.row_offset[k]; i < gain.row_offset[k + 1]; ++i)
        g += gain.w[i] * a[gain.l[i]] * a[gain.lp[i]];
      const double* row = &loss.m[k * n];
      double rate = 0.0;
      for (std::size_t l = 0; l < n; ++l) rate += row[l] * a[l];
      da[k] = g - a[k] * rate;
    }
  });
  return da;
}

double max_loss_rate(const SpectralState& state, const LossTensor& loss) {
  const std::size_t n = state.a.size();
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = &loss.m[k * n];
    double rate = 0.0;
    for (std::size_t l = 0; l < n; ++l) rate += row[l] * state.a[l];
    worst = std::max(worst, rate);
  }
  return worst;
}

namespace {

double min_coeff(const std::vector<double>& a) {
  double m = a.empty() ? 0.0 : a[0];
  for (double x : a) m = std::min(m, x);
  return m;
}

}  // namespace

SpectralState step(const SpectralState& state, double dt, TimeMethod method,
                   const GainTensor& gain, const LossTensor& loss, int threads) {
  const std::size_t n = state.a.size();
  SpectralState next;
  next.t = state.t + dt;
  next.a.resize(n);

  if (method == TimeMethod::forward_euler) {
    const std::vector<double> k1 = rhs(state, gain, loss, threads);
    for (std::size_t i = 0; i < n; ++i) next.a[i] = state.a[i] + dt * k1[i];
    return next;
  }

  // Classic 4-stage Runge-Kutta.
  SpectralState tmp;
  tmp.a.resize(n);
  const std::vector<double> k1 = rhs(state, gain, loss, threads);
  tmp.t = state.t + 0.5 * dt;
  for (std::size_t i = 0; i < n; ++i) tmp.a[i] = state.a[i] + 0.5 * dt * k1[i];
  const std::vector<double> k2 = rhs(tmp, gain, loss, threads);
  for (std::size_t i = 0; i < n; ++i) tmp.a[i] = state.a[i] + 0.5 * dt * k2[i];
  const std::vector<double> k3 = rhs(tmp, gain, loss, threads);
  tmp.t = state.t + dt;
  for (std::size_t i = 0; i < n; ++i) tmp.a[i] = state.a[i] + dt * k3[i];
  const std::vector<double> k4 = rhs(tmp, gain, loss, threads);
  for (std::size_t i = 0; i < n; ++i)
    next.a[i] = state.a[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return next;
}

double reconstruct(const SpectralState& state, const FilteredBasis& basis, const Velocity& v) {
  return basis.reconstruct(state.a, phi(v)) / bracket_sq(v);
}

RunResult run(const SpectralState& initial, const GainTensor& gain, const LossTensor& loss,
              const SolverConfig& config,
              const std::function<void(const SpectralState&)>& observer) {
  if (config.t_end < 0.0) throw ConfigError("t_end must be >= 0");
  if (config.output_stride < 1) throw ConfigError("output_stride must be >= 1");

  RunResult result;
  SpectralState state = initial;
  if (observer) observer(state);
  std::size_t steps_since_output = 0;

  const bool will_step = state.t < config.t_end - 1e-14 * std::max(1.0, config.t_end);
  double dt = config.dt;
  if (dt <= 0.0 && will_step) {
    const double rate = max_loss_rate(initial, loss);
    if (rate <= 0.0) throw NumericalError("cannot choose dt automatically: zero loss rate");
    dt = 0.5 / rate;
  }
  const double dt_floor = dt / 1024.0;

  while (state.t < config.t_end - 1e-14 * std::max(1.0, config.t_end)) {
    const double this_dt = std::min(dt, config.t_end - state.t);
    SpectralState next = step(state, this_dt, config.method, gain, loss, config.threads);
    if (min_coeff(next.a) < -config.positivity_tol) {
      if (!config.halve_dt_on_negative)
        throw NumericalError("positivity violated at t=" + std::to_string(next.t) +
                             " (min coefficient " + std::to_string(min_coeff(next.a)) + ")");
      dt *= 0.5;
      ++result.dt_halvings;
      if (dt < dt_floor)
        throw NumericalError("instability: dt halving reached the dt0/1024 floor at t=" +
                             std::to_string(state.t));
      continue;
    }
    state = std::move(next);
    ++result.steps;
    if (++steps_since_output == static_cast<std::size_t>(config.output_stride)) {
      steps_since_output = 0;
      if (observer) observer(state);
    }
  }
  if (steps_since_output != 0 && observer) observer(state);
  result.final_state = std::move(state);
  result.dt_used = dt;
  return result;
}

}  // namespace boltzwave
