#pragma once

#include <functional>
#include <string>
#include <vector>

#include "boltzwave/collision_tensor.hpp"
#include "boltzwave/haar_basis.hpp"

namespace boltzwave {

/// Coefficient vector a_{N,k} over the kept cells at time t. The reconstructed
/// density is f_N(v) = [sum_k a_k Phi_k(phi(v))] / (1 + |v|_inf^2).
struct SpectralState {
  double t = 0.0;
  std::vector<double> a;
};

enum class TimeMethod { forward_euler, rk4 };

struct SolverConfig {
  TimeMethod method = TimeMethod::rk4;
  double dt = 0.0;  // <= 0 requests the loss-rate heuristic 0.5 / max_k rate_k(a0)
  double t_end = 1.0;
  int output_stride = 1;
  double positivity_tol = 1e-10;
  bool halve_dt_on_negative = true;
  int threads = 1;
};

/// Sum of weighted Gaussian bumps; the standing model for initial data.
struct GaussianBump {
  double rho = 1.0;
  Vec3 u{};
  double temperature = 1.0;
};

struct InitialCondition {
  std::vector<GaussianBump> bumps;

  double eval(const Velocity& v) const;
  void validate() const;
};

/// a_k(0) = A * int_cell f0(phi_inv(vb)) * (1 + |phi_inv(vb)|_inf^2) dvb.
SpectralState init_from_f0(const InitialCondition& f0, const FilteredBasis& basis,
                           int quad_order = 8, int threads = 1);

/// da_k/dt = sum_{(k,l,l')} G[k][l][l'] a_l a_{l'}  -  a_k sum_l L[k][l] a_l.
std::vector<double> rhs(const SpectralState& state, const GainTensor& gain,
                        const LossTensor& loss, int threads = 1);

/// max_k sum_l L[k][l] a_l: the stiffest loss rate, used by the dt heuristic.
double max_loss_rate(const SpectralState& state, const LossTensor& loss);

/// One explicit step with the configured method. Throws NumericalError when a
/// coefficient falls below -positivity_tol (run() owns the dt-halving retry).
SpectralState step(const SpectralState& state, double dt, TimeMethod method,
                   const GainTensor& gain, const LossTensor& loss, int threads = 1);

/// Pointwise reconstruction of f_N; zero outside the kept region.
double reconstruct(const SpectralState& state, const FilteredBasis& basis, const Velocity& v);

struct RunResult {
  SpectralState final_state;
  double dt_used = 0.0;       // dt at the end of the run (after any halving)
  int dt_halvings = 0;
  std::size_t steps = 0;
};

/// Integrates to t_end, invoking `observer` at t=0, every `output_stride`
/// accepted steps, and at the final time. On a positivity violation the step
/// is retried with dt/2; past a floor of dt0/1024 a NumericalError propagates.
RunResult run(const SpectralState& initial, const GainTensor& gain, const LossTensor& loss,
              const SolverConfig& config,
              const std::function<void(const SpectralState&)>& observer);

}  // namespace boltzwave
