// boltzwave: tensor building, solving, assumption verification and cache
// inspection for the wavelet-spectral homogeneous Boltzmann solver.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "boltzwave/collision_tensor.hpp"
#include "boltzwave/diagnostics.hpp"
#include "boltzwave/errors.hpp"
#include "boltzwave/parallel.hpp"
#include "boltzwave/scenario_io.hpp"
#include "boltzwave/spectral_solver.hpp"
#include "boltzwave/verifiers.hpp"

namespace bw = boltzwave;
namespace fs = std::filesystem;

namespace {

std::string cache_path_for(const bw::ScenarioConfig& cfg) {
  fs::path path = cfg.tensor_cache_path;
  if (const char* dir = std::getenv("BOLTZWAVE_CACHE_DIR"); dir && *dir)
    path = fs::path(dir) / path.filename();
  return path.string();
}

/// Mass-weighted mean collision frequency of the initial state; its inverse
/// is the "collision time" unit used by t_end_collision_times.
double mean_collision_rate(const bw::SpectralState& state, const bw::LossTensor& loss,
                           const bw::WeightTable& table) {
  const std::size_t n = state.a.size();
  const std::vector<double>& w1 = table.column("one");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = &loss.m[k * n];
    double rate = 0.0;
    for (std::size_t l = 0; l < n; ++l) rate += row[l] * state.a[l];
    num += rate * state.a[k] * w1[k];
    den += state.a[k] * w1[k];
  }
  if (den <= 0.0 || num <= 0.0) throw bw::NumericalError("degenerate initial collision rate");
  return num / den;
}

bw::CollisionTensors ensure_tensors(const bw::ScenarioConfig& cfg, const std::string& path,
                                    bool force, int threads, bool quiet = false) {
  const bw::TensorMeta want = cfg.requested_meta();
  if (!force && fs::exists(path)) {
    bw::CollisionTensors t = bw::load_matching(path, want);
    if (!quiet)
      std::printf("cache hit: %s (%zu gain entries, %zu loss entries, dropped mass %.4f)\n",
                  path.c_str(), t.gain.entry_count(), t.loss.nonzero_count(),
                  t.meta.dropped_mass_fraction);
    return t;
  }
  bw::FilteredBasis basis(cfg.level, cfg.delta);
  bw::BuildOptions opts;
  opts.threads = threads;
  opts.unweighted = cfg.unweighted_variant;
  bw::CollisionTensors t =
      bw::build(basis, cfg.kernel, cfg.samples_per_pair, cfg.seed, opts);
  bw::save(t, path);
  if (!quiet)
    std::printf("built %s in %.1fs: %zu gain entries, %zu loss entries, dropped mass %.4f\n",
                path.c_str(), t.meta.build_seconds, t.gain.entry_count(),
                t.loss.nonzero_count(), t.meta.dropped_mass_fraction);
  return t;
}

int cmd_build_tensor(const std::string& config_path, bool force, int threads) {
  const bw::ScenarioConfig cfg = bw::parse_config_file(config_path);
  ensure_tensors(cfg, cache_path_for(cfg), force, threads);
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override, int threads) {
  bw::ScenarioConfig cfg = bw::parse_config_file(config_path);
  const std::string csv_path = out_override.empty() ? cfg.csv_out_path : out_override;

  bw::CollisionTensors tensors = ensure_tensors(cfg, cache_path_for(cfg), false, threads);
  bw::FilteredBasis basis(cfg.level, cfg.delta);
  bw::SpectralState initial = bw::init_from_f0(cfg.initial_condition, basis, 8, threads);

  bw::WeightTable table(basis, 6, threads);
  bw::DiagnosticsOptions dopts = cfg.diagnostics_options();
  dopts.dropped_mass_echo = tensors.meta.dropped_mass_fraction;
  bw::register_default_weights(table, dopts);

  bw::SolverConfig solver = cfg.solver;
  solver.threads = threads;
  if (cfg.t_end_collision_times) {
    const double rate = mean_collision_rate(initial, tensors.loss, table);
    solver.t_end = *cfg.t_end_collision_times / rate;
    std::printf("collision time 1/rate = %.6g, t_end = %.6g\n", 1.0 / rate, solver.t_end);
  }

  std::vector<bw::DiagnosticsRecord> records;
  const bw::RunResult result =
      bw::run(initial, tensors.gain, tensors.loss, solver,
              [&](const bw::SpectralState& s) { records.push_back(bw::record(s, table, dopts)); });
  bw::emit_csv(records, csv_path);

  const bw::DiagnosticsRecord& first = records.front();
  const bw::DiagnosticsRecord& last = records.back();
  std::printf("run finished: %zu steps, dt %.6g (%d halvings)\n", result.steps, result.dt_used,
              result.dt_halvings);
  std::printf("mass %.6g -> %.6g, energy %.6g -> %.6g, entropy %.6g -> %.6g\n", first.mass,
              last.mass, first.energy, last.energy, first.entropy, last.entropy);

  // Relaxation-rate summary over the post-transient window.
  if (records.size() >= 8) {
    std::vector<std::pair<double, double>> series;
    for (std::size_t i = records.size() / 5; i < records.size(); ++i)
      series.emplace_back(records[i].t, records[i].dist_eq);
    try {
      const bw::RateFit fit = bw::equilibrium_rate_fit(series);
      std::printf("equilibrium relaxation: c = %.6g (R^2 = %.4f)\n", fit.c, fit.quality);
    } catch (const bw::NumericalError&) {
      std::printf("equilibrium relaxation: insufficient data for a fit\n");
    }
  }
  std::printf("csv written: %s (%zu rows)\n", csv_path.c_str(), records.size());
  return 0;
}

int cmd_verify(const std::string& config_path, const std::string& which, int threads) {
  const bw::ScenarioConfig cfg = bw::parse_config_file(config_path);
  bw::FilteredBasis basis(cfg.level, cfg.delta);
  bool all_pass = true;

  auto want = [&](const char* name) { return which == "all" || which == name; };

  if (want("1")) {
    const auto r = bw::verify_assumption1(basis, 1'000'000, cfg.seed, 1e-12, threads);
    std::printf("assumption 1: projection identity %s, max defect %.3e (tol 1e-12) -> %s\n",
                r.projection_identity_ok ? "ok" : "BROKEN", r.max_defect,
                r.pass ? "PASS" : "FAIL");
    std::printf("              (max-norm weight variant defect %.3e, informational)\n",
                r.max_defect_maxnorm);
    if (!r.pass) {
      std::printf("  counterexample: v=(%g,%g,%g) v*=(%g,%g,%g) sigma=(%g,%g,%g)\n",
                  r.worst_v.c.x, r.worst_v.c.y, r.worst_v.c.z, r.worst_vs.c.x, r.worst_vs.c.y,
                  r.worst_vs.c.z, r.worst_sigma.x, r.worst_sigma.y, r.worst_sigma.z);
      all_pass = false;
    }
  }
  if (want("2")) {
    for (const double s : {-4.0, 4.0, 6.0}) {
      const auto r = bw::verify_assumption2(basis, s, 9, 6, threads);
      std::printf("assumption 2 (s=%+g): ratio in [%.6g, %.6g], bounds [%.6g, %.6g] -> %s\n", s,
                  r.min_ratio, r.max_ratio, r.bound_low, r.bound_high, r.pass ? "PASS" : "FAIL");
      if (!r.pass) {
        std::printf("  violating point: (%g,%g,%g)\n", r.worst_low.c.x, r.worst_low.c.y,
                    r.worst_low.c.z);
        all_pass = false;
      }
    }
  }
  if (want("3")) {
    const auto r = bw::verify_assumption3(basis, 1, 9, 6, threads);
    const bool ok = r.measured_eps <= r.printed_bound;
    std::printf(
        "assumption 3 (n=1): measured eps %.6g vs printed bound %.6g (interior %.6g + central "
        "%.6g) -> %s\n",
        r.measured_eps, r.printed_bound, r.interior_term, r.central_term, ok ? "PASS" : "FAIL");
    all_pass = all_pass && ok;
  }
  if (want("4")) {
    const double q = cfg.kernel.gamma / 2.0;
    const auto r = bw::verify_assumption4(basis, cfg.exp_a, q, 9, 6, threads);
    std::printf("assumption 4 (a=%g, q=%g): Kbar = %.6g -> %s\n", r.a, r.q, r.kbar,
                r.finite ? "PASS" : "FAIL");
    all_pass = all_pass && r.finite;
  }
  if (!all_pass) throw bw::NumericalError("assumption verification failed");
  return 0;
}

int cmd_inspect_cache(const std::string& path) {
  const bw::CollisionTensors t = bw::load(path);
  std::printf("tensor cache: %s\n", path.c_str());
  std::printf("  level N = %d, delta = %.17g\n", t.meta.level, t.meta.delta);
  std::printf("  kernel: gamma = %.17g, theta_b = %.17g, b0 = %.17g", t.meta.kernel.gamma,
              t.meta.kernel.theta_b, t.meta.kernel.b0);
  if (t.meta.kernel.lambda)
    std::printf(", lambda = %.17g\n", *t.meta.kernel.lambda);
  else
    std::printf(", untruncated\n");
  std::printf("  seed = %llu, samples_per_pair = %llu, unweighted = %s\n",
              static_cast<unsigned long long>(t.meta.seed),
              static_cast<unsigned long long>(t.meta.samples_per_pair),
              t.meta.unweighted ? "yes" : "no");
  std::printf("  %zu gain entries, %zu loss entries, dropped mass %.6f\n",
              t.gain.entry_count(), t.loss.nonzero_count(), t.meta.dropped_mass_fraction);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavelet-spectral solver for the homogeneous Boltzmann equation"};
  app.require_subcommand(1);

  std::string config_path, out_override, cache_path, assumption = "all";
  int threads = bw::default_threads();
  bool force = false;

  CLI::App* build = app.add_subcommand("build-tensor", "build or reuse the collision tensor cache");
  build->add_option("--config", config_path, "scenario config (JSON)")->required();
  build->add_flag("--force", force, "rebuild even when a matching cache exists");
  build->add_option("--threads", threads, "worker pool size");

  CLI::App* runc = app.add_subcommand("run", "integrate a scenario and emit diagnostics CSV");
  runc->add_option("--config", config_path, "scenario config (JSON)")->required();
  runc->add_option("--out", out_override, "override the CSV output path");
  runc->add_option("--threads", threads, "worker pool size");

  CLI::App* verify = app.add_subcommand("verify", "run the basis assumption verifiers");
  verify->add_option("--config", config_path, "scenario config (JSON)")->required();
  verify->add_option("--assumption", assumption, "1|2|3|4|all")
      ->check(CLI::IsMember({"1", "2", "3", "4", "all"}));
  verify->add_option("--threads", threads, "worker pool size");

  CLI::App* inspect = app.add_subcommand("inspect-cache", "print a tensor cache header");
  inspect->add_option("--path", cache_path, "cache file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) return cmd_build_tensor(config_path, force, threads);
    if (runc->parsed()) return cmd_run(config_path, out_override, threads);
    if (verify->parsed()) return cmd_verify(config_path, assumption, threads);
    if (inspect->parsed()) return cmd_inspect_cache(cache_path);
  } catch (const bw::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return static_cast<int>(bw::ExitCode::config_error);
  } catch (const bw::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return static_cast<int>(bw::ExitCode::numerical_failure);
  } catch (const bw::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return static_cast<int>(bw::ExitCode::io_error);
  }
  return 0;
}
