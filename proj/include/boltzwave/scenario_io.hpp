#pragma once

#include <optional>
#include <string>
#include <vector>

#include "boltzwave/diagnostics.hpp"
#include "boltzwave/kernel.hpp"
#include "boltzwave/spectral_solver.hpp"

namespace boltzwave {

/// A full run description, parsed from JSON. See parse_config for the schema
/// and defaults; emit_canonical re-serializes every field explicitly so that
/// parse(emit(c)) is the identity.
struct ScenarioConfig {
  int level = 0;
  double delta = 0.0;

  KernelSpec kernel;       // b0 resolved; kernel_normalized remembers "normalized"
  bool kernel_normalized = true;

  std::uint64_t samples_per_pair = 20;
  std::uint64_t seed = 20240901;

  SolverConfig solver;  // solver.dt <= 0 encodes "auto"
  /// When set, t_end is `t_end_collision_times` initial mean collision times,
  /// resolved after the initial state is known.
  std::optional<double> t_end_collision_times;

  InitialCondition initial_condition;

  std::vector<double> moment_s{2.0, 3.0};
  double exp_a = 0.1;
  std::optional<double> exp_s;  // defaults to kernel.gamma when unset

  std::string tensor_cache_path = "tensor.bwt";
  std::string csv_out_path = "run.csv";

  bool unweighted_variant = false;

  DiagnosticsOptions diagnostics_options() const;
  TensorMeta requested_meta() const;
};

/// Parses and fully validates a JSON config. All violations are collected and
/// reported together in the ConfigError message, each naming its field path.
ScenarioConfig parse_config(const std::string& text);

ScenarioConfig parse_config_file(const std::string& path);

/// Canonical re-emission with every default made explicit.
std::string emit_canonical(const ScenarioConfig& config);

/// Fixed CSV schema:
/// t, mass, mom_x, mom_y, mom_z, energy, m4, m6, expmom, l2, entropy,
/// dist_eq, min_cell, dropped_mass -- 17 significant digits per number.
std::string csv_header();
std::string csv_row(const DiagnosticsRecord& rec);
void emit_csv(const std::vector<DiagnosticsRecord>& records, const std::string& path);

}  // namespace boltzwave
