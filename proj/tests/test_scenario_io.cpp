#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "boltzwave/errors.hpp"
#include "boltzwave/scenario_io.hpp"

using namespace boltzwave;

TEST_CASE("minimal config fills documented defaults") {
  const ScenarioConfig cfg = parse_config(R"({"level": 3, "delta": 0.9})");
  CHECK(cfg.level == 3);
  CHECK(cfg.delta == 0.9);
  CHECK(cfg.kernel.gamma == 0.5);
  CHECK(cfg.kernel.theta_b == doctest::Approx(M_PI / 6.0));
  CHECK(cfg.kernel_normalized);
  CHECK(cfg.kernel.b0 == doctest::Approx(0.09188814923697098).epsilon(1e-12));
  CHECK(!cfg.kernel.lambda.has_value());
  CHECK(cfg.samples_per_pair == 20);
  CHECK(cfg.seed == 20240901);
  CHECK(cfg.solver.method == TimeMethod::rk4);
  CHECK(cfg.solver.dt == 0.0);  // auto
  CHECK(cfg.solver.t_end == 1.0);
  CHECK(cfg.solver.output_stride == 1);
  CHECK(cfg.solver.positivity_tol == 1e-10);
  REQUIRE(cfg.initial_condition.bumps.size() == 1);
  CHECK(cfg.initial_condition.bumps[0].rho == 1.0);
  CHECK(cfg.initial_condition.bumps[0].temperature == 1.0);
  CHECK(cfg.moment_s == std::vector<double>{2.0, 3.0});
  CHECK(cfg.exp_a == 0.1);
  CHECK(!cfg.exp_s.has_value());
  CHECK(cfg.tensor_cache_path == "tensor.bwt");
  CHECK(cfg.csv_out_path == "run.csv");
  CHECK(!cfg.unweighted_variant);
}

TEST_CASE("range violations name the field") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"level": 3, "delta": 1.2})"),
                       doctest::Contains("delta"), ConfigError);
  try {
    parse_config(R"({"level": 0, "delta": 1.2, "kernel": {"gamma": 7}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("level") != std::string::npos);
    CHECK(msg.find("delta") != std::string::npos);
    CHECK(msg.find("kernel.gamma") != std::string::npos);
    CHECK(msg.find("3 violation") != std::string::npos);
  }
}

TEST_CASE("normalized b0 from gamma and theta_b") {
  const ScenarioConfig cfg = parse_config(
      R"({"level": 4, "delta": 0.5, "kernel": {"gamma": 0.5, "theta_b": 0.5236, "b0": "normalized"}})");
  CHECK(cfg.kernel.b0 == doctest::Approx(0.091888).epsilon(1e-4));
}

TEST_CASE("bad syntax, unknown keys, wrong types") {
  CHECK_THROWS_WITH_AS(parse_config("{"), doctest::Contains("syntax"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"level": 3, "delta": 0.9, "bogus": 1})"),
                       doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(R"({"level": 3, "delta": 0.9, "solver": {"method": "leapfrog"}})"),
      doctest::Contains("solver.method"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(R"({"level": 3, "delta": 0.9, "initial_condition": [{"rho": -1}]})"),
      doctest::Contains("initial_condition[0].rho"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config(
          R"({"level": 3, "delta": 0.9, "solver": {"t_end": 1, "t_end_collision_times": 5}})"),
      doctest::Contains("mutually exclusive"), ConfigError);
}

TEST_CASE("parse(emit(config)) is the identity on the canonical form") {
  const char* text = R"({
    "level": 4, "delta": 0.9,
    "kernel": {"gamma": 0.6, "theta_b": 0.5, "b0": 0.25, "lambda": 12.5},
    "mc": {"samples_per_pair": 7, "seed": 99},
    "solver": {"method": "euler", "dt": 0.125, "t_end": 2.5, "output_stride": 4,
               "positivity_tol": 1e-9, "halve_dt_on_negative": false},
    "initial_condition": [{"rho": 0.5, "u": [0.8, 0, 0], "T": 0.3},
                          {"rho": 0.5, "u": [-0.8, 0, 0], "T": 0.3}],
    "moments": {"s": [2, 3, 4], "exp": {"a": 0.05, "s": 0.5}},
    "paths": {"tensor_cache": "x.bwt", "csv_out": "y.csv"},
    "flags": {"unweighted_variant": true}
  })";
  const ScenarioConfig cfg = parse_config(text);
  const std::string canon = emit_canonical(cfg);
  const ScenarioConfig cfg2 = parse_config(canon);
  CHECK(emit_canonical(cfg2) == canon);
  CHECK(cfg2.kernel.b0 == cfg.kernel.b0);
  CHECK(cfg2.solver.dt == cfg.solver.dt);
  CHECK(cfg2.initial_condition.bumps.size() == 2);
  CHECK(cfg2.initial_condition.bumps[1].u.x == -0.8);
  CHECK(cfg2.unweighted_variant);

  // Defaults-only config also round-trips.
  const ScenarioConfig minimal = parse_config(R"({"level": 3, "delta": 0.9})");
  CHECK(emit_canonical(parse_config(emit_canonical(minimal))) == emit_canonical(minimal));
}

TEST_CASE("csv rows") {
  CHECK(csv_header() ==
        "t,mass,mom_x,mom_y,mom_z,energy,m4,m6,expmom,l2,entropy,dist_eq,min_cell,dropped_mass");
  DiagnosticsRecord r;
  r.t = 0.5;
  r.mass = 1.0 / 3.0;
  const std::string row = csv_row(r);
  CHECK(row.substr(0, 4) == "0.5,");
  CHECK(row.find("0.33333333333333331") != std::string::npos);
  CHECK(csv_row(r) == row);  // formatting is deterministic

  std::vector<DiagnosticsRecord> empty;
  emit_csv(empty, "/tmp/bw_empty.csv");
  std::ifstream is("/tmp/bw_empty.csv");
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 1);

  emit_csv({r}, "/tmp/bw_one.csv");
  std::ifstream is2("/tmp/bw_one.csv");
  lines = 0;
  while (std::getline(is2, line)) ++lines;
  CHECK(lines == 2);
}
