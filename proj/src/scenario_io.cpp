#include "boltzwave/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "boltzwave/errors.hpp"

namespace boltzwave {

using json = nlohmann::ordered_json;

DiagnosticsOptions ScenarioConfig::diagnostics_options() const {
  DiagnosticsOptions opts;
  opts.exp_a = exp_a;
  opts.exp_s = exp_s.value_or(kernel.gamma);
  return opts;
}

TensorMeta ScenarioConfig::requested_meta() const {
  TensorMeta meta;
  meta.level = level;
  meta.delta = delta;
  meta.kernel = kernel;
  meta.seed = seed;
  meta.samples_per_pair = samples_per_pair;
  meta.unweighted = unweighted_variant;
  return meta;
}

namespace {

/// Collects violations so a config is rejected with every problem named.
struct Validator {
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& what) {
    errors.push_back(path + ": " + what);
  }

  void check_keys(const json& obj, const std::string& path,
                  std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool known = false;
      for (const char* key : allowed)
        if (it.key() == key) known = true;
      if (!known) fail(path + "." + it.key(), "unknown key");
    }
  }

  template <typename T>
  std::optional<T> get(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(path + "." + key, "wrong type");
      return std::nullopt;
    }
  }

  void finish() const {
    if (errors.empty()) return;
    std::string msg = "invalid config (" + std::to_string(errors.size()) + " violation(s)):";
    for (const std::string& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
};

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");

  Validator v;
  ScenarioConfig cfg;

  v.check_keys(root, "$",
               {"level", "delta", "kernel", "mc", "solver", "initial_condition", "moments",
                "paths", "flags"});

  if (auto level = v.get<int>(root, "$", "level")) {
    cfg.level = *level;
    if (cfg.level < 1 || cfg.level > 12) v.fail("level", "must be an integer in [1, 12]");
  } else if (!root.contains("level")) {
    v.fail("level", "required");
  }
  if (auto delta = v.get<double>(root, "$", "delta")) {
    cfg.delta = *delta;
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) v.fail("delta", "must lie in (0, 1)");
  } else if (!root.contains("delta")) {
    v.fail("delta", "required");
  }

  cfg.kernel.gamma = 0.5;
  cfg.kernel.theta_b = M_PI / 6.0;
  cfg.kernel_normalized = true;
  if (root.contains("kernel")) {
    const json& k = root["kernel"];
    if (!k.is_object()) {
      v.fail("kernel", "must be an object");
    } else {
      v.check_keys(k, "kernel", {"gamma", "theta_b", "b0", "lambda"});
      if (auto g = v.get<double>(k, "kernel", "gamma")) {
        cfg.kernel.gamma = *g;
        if (!(*g > 0.0 && *g < 1.0)) v.fail("kernel.gamma", "must lie in (0, 1)");
      }
      if (auto tb = v.get<double>(k, "kernel", "theta_b")) {
        cfg.kernel.theta_b = *tb;
        if (!(*tb > 0.0 && *tb < M_PI / 2.0)) v.fail("kernel.theta_b", "must lie in (0, pi/2)");
      }
      if (k.contains("b0")) {
        if (k["b0"].is_string()) {
          if (k["b0"].get<std::string>() != "normalized")
            v.fail("kernel.b0", "must be a number or the string \"normalized\"");
        } else if (auto b0 = v.get<double>(k, "kernel", "b0")) {
          cfg.kernel_normalized = false;
          cfg.kernel.b0 = *b0;
          if (*b0 < 0.0) v.fail("kernel.b0", "must be nonnegative");
        }
      }
      if (k.contains("lambda")) {
        if (auto lam = v.get<double>(k, "kernel", "lambda")) {
          cfg.kernel.lambda = *lam;
          if (!(*lam > 0.0)) v.fail("kernel.lambda", "must be positive");
        }
      }
    }
  }
  if (cfg.kernel_normalized) cfg.kernel.b0 = KernelSpec::normalized_b0(cfg.kernel.theta_b);

  if (root.contains("mc")) {
    const json& mc = root["mc"];
    if (!mc.is_object()) {
      v.fail("mc", "must be an object");
    } else {
      v.check_keys(mc, "mc", {"samples_per_pair", "seed"});
      if (auto spp = v.get<std::int64_t>(mc, "mc", "samples_per_pair")) {
        if (*spp < 1) v.fail("mc.samples_per_pair", "must be >= 1");
        cfg.samples_per_pair = static_cast<std::uint64_t>(std::max<std::int64_t>(*spp, 1));
      }
      if (auto seed = v.get<std::uint64_t>(mc, "mc", "seed")) cfg.seed = *seed;
    }
  }

  cfg.solver.dt = 0.0;  // auto
  cfg.solver.t_end = 1.0;
  if (root.contains("solver")) {
    const json& s = root["solver"];
    if (!s.is_object()) {
      v.fail("solver", "must be an object");
    } else {
      v.check_keys(s, "solver",
                   {"method", "dt", "t_end", "t_end_collision_times", "output_stride",
                    "positivity_tol", "halve_dt_on_negative"});
      if (auto method = v.get<std::string>(s, "solver", "method")) {
        if (*method == "rk4")
          cfg.solver.method = TimeMethod::rk4;
        else if (*method == "euler")
          cfg.solver.method = TimeMethod::forward_euler;
        else
          v.fail("solver.method", "must be \"rk4\" or \"euler\"");
      }
      if (s.contains("dt")) {
        if (s["dt"].is_string()) {
          if (s["dt"].get<std::string>() != "auto")
            v.fail("solver.dt", "must be a positive number or \"auto\"");
        } else if (auto dt = v.get<double>(s, "solver", "dt")) {
          if (!(*dt > 0.0)) v.fail("solver.dt", "must be positive");
          cfg.solver.dt = *dt;
        }
      }
      if (auto te = v.get<double>(s, "solver", "t_end")) {
        cfg.solver.t_end = *te;
        if (*te < 0.0) v.fail("solver.t_end", "must be >= 0");
      }
      if (auto tc = v.get<double>(s, "solver", "t_end_collision_times")) {
        cfg.t_end_collision_times = *tc;
        if (!(*tc > 0.0)) v.fail("solver.t_end_collision_times", "must be positive");
        if (s.contains("t_end"))
          v.fail("solver.t_end", "mutually exclusive with t_end_collision_times");
      }
      if (auto stride = v.get<int>(s, "solver", "output_stride")) {
        cfg.solver.output_stride = *stride;
        if (*stride < 1) v.fail("solver.output_stride", "must be >= 1");
      }
      if (auto tol = v.get<double>(s, "solver", "positivity_tol")) {
        cfg.solver.positivity_tol = *tol;
        if (*tol < 0.0) v.fail("solver.positivity_tol", "must be >= 0");
      }
      if (auto halve = v.get<bool>(s, "solver", "halve_dt_on_negative"))
        cfg.solver.halve_dt_on_negative = *halve;
    }
  }

  cfg.initial_condition.bumps = {GaussianBump{1.0, {0, 0, 0}, 1.0}};
  if (root.contains("initial_condition")) {
    const json& ic = root["initial_condition"];
    if (!ic.is_array() || ic.empty()) {
      v.fail("initial_condition", "must be a non-empty array of bumps");
    } else {
      cfg.initial_condition.bumps.clear();
      for (std::size_t i = 0; i < ic.size(); ++i) {
        const std::string path = "initial_condition[" + std::to_string(i) + "]";
        const json& b = ic[i];
        if (!b.is_object()) {
          v.fail(path, "must be an object");
          continue;
        }
        v.check_keys(b, path, {"rho", "u", "T"});
        GaussianBump bump;
        if (auto rho = v.get<double>(b, path, "rho")) {
          bump.rho = *rho;
          if (!(*rho > 0.0)) v.fail(path + ".rho", "must be positive");
        }
        if (b.contains("u")) {
          const json& u = b["u"];
          if (!u.is_array() || u.size() != 3) {
            v.fail(path + ".u", "must be an array of 3 numbers");
          } else {
            for (int d = 0; d < 3; ++d) {
              if (!u[d].is_number())
                v.fail(path + ".u[" + std::to_string(d) + "]", "must be a number");
              else
                bump.u[d] = u[d].get<double>();
            }
          }
        }
        if (auto t = v.get<double>(b, path, "T")) {
          bump.temperature = *t;
          if (!(*t > 0.0)) v.fail(path + ".T", "must be positive");
        }
        cfg.initial_condition.bumps.push_back(bump);
      }
    }
  }

  if (root.contains("moments")) {
    const json& m = root["moments"];
    if (!m.is_object()) {
      v.fail("moments", "must be an object");
    } else {
      v.check_keys(m, "moments", {"s", "exp"});
      if (m.contains("s")) {
        if (!m["s"].is_array()) {
          v.fail("moments.s", "must be an array of numbers");
        } else {
          cfg.moment_s.clear();
          for (const auto& x : m["s"]) {
            if (!x.is_number())
              v.fail("moments.s", "must contain only numbers");
            else
              cfg.moment_s.push_back(x.get<double>());
          }
        }
      }
      if (m.contains("exp")) {
        const json& e = m["exp"];
        if (!e.is_object()) {
          v.fail("moments.exp", "must be an object");
        } else {
          v.check_keys(e, "moments.exp", {"a", "s"});
          if (auto a = v.get<double>(e, "moments.exp", "a")) {
            cfg.exp_a = *a;
            if (*a < 0.0) v.fail("moments.exp.a", "must be >= 0");
          }
          if (auto s = v.get<double>(e, "moments.exp", "s")) {
            cfg.exp_s = *s;
            if (!(*s > 0.0)) v.fail("moments.exp.s", "must be positive");
          }
        }
      }
    }
  }

  if (root.contains("paths")) {
    const json& p = root["paths"];
    if (!p.is_object()) {
      v.fail("paths", "must be an object");
    } else {
      v.check_keys(p, "paths", {"tensor_cache", "csv_out"});
      if (auto tc = v.get<std::string>(p, "paths", "tensor_cache")) cfg.tensor_cache_path = *tc;
      if (auto co = v.get<std::string>(p, "paths", "csv_out")) cfg.csv_out_path = *co;
    }
  }

  if (root.contains("flags")) {
    const json& f = root["flags"];
    if (!f.is_object()) {
      v.fail("flags", "must be an object");
    } else {
      v.check_keys(f, "flags", {"unweighted_variant"});
      if (auto uw = v.get<bool>(f, "flags", "unweighted_variant"))
        cfg.unweighted_variant = *uw;
    }
  }

  v.finish();
  return cfg;
}

ScenarioConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string emit_canonical(const ScenarioConfig& cfg) {
  json root;
  root["level"] = cfg.level;
  root["delta"] = cfg.delta;
  json kernel;
  kernel["gamma"] = cfg.kernel.gamma;
  kernel["theta_b"] = cfg.kernel.theta_b;
  if (cfg.kernel_normalized)
    kernel["b0"] = "normalized";
  else
    kernel["b0"] = cfg.kernel.b0;
  if (cfg.kernel.lambda) kernel["lambda"] = *cfg.kernel.lambda;
  root["kernel"] = kernel;
  root["mc"] = {{"samples_per_pair", cfg.samples_per_pair}, {"seed", cfg.seed}};
  json solver;
  solver["method"] = cfg.solver.method == TimeMethod::rk4 ? "rk4" : "euler";
  if (cfg.solver.dt > 0.0)
    solver["dt"] = cfg.solver.dt;
  else
    solver["dt"] = "auto";
  if (cfg.t_end_collision_times)
    solver["t_end_collision_times"] = *cfg.t_end_collision_times;
  else
    solver["t_end"] = cfg.solver.t_end;
  solver["output_stride"] = cfg.solver.output_stride;
  solver["positivity_tol"] = cfg.solver.positivity_tol;
  solver["halve_dt_on_negative"] = cfg.solver.halve_dt_on_negative;
  root["solver"] = solver;
  json ic = json::array();
  for (const GaussianBump& b : cfg.initial_condition.bumps)
    ic.push_back({{"rho", b.rho}, {"u", {b.u.x, b.u.y, b.u.z}}, {"T", b.temperature}});
  root["initial_condition"] = ic;
  json moments;
  moments["s"] = cfg.moment_s;
  json expm;
  expm["a"] = cfg.exp_a;
  if (cfg.exp_s) expm["s"] = *cfg.exp_s;
  moments["exp"] = expm;
  root["moments"] = moments;
  root["paths"] = {{"tensor_cache", cfg.tensor_cache_path}, {"csv_out", cfg.csv_out_path}};
  root["flags"] = {{"unweighted_variant", cfg.unweighted_variant}};
  return root.dump(2) + "\n";
}

namespace {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string csv_header() {
  return "t,mass,mom_x,mom_y,mom_z,energy,m4,m6,expmom,l2,entropy,dist_eq,min_cell,"
         "dropped_mass";
}

std::string csv_row(const DiagnosticsRecord& r) {
  std::string out = fmt17(r.t);
  for (double x : {r.mass, r.momentum.x, r.momentum.y, r.momentum.z, r.energy, r.m4, r.m6,
                   r.expmom, r.l2, r.entropy, r.dist_eq, r.min_cell, r.dropped_mass}) {
    out += ',';
    out += fmt17(x);
  }
  return out;
}

void emit_csv(const std::vector<DiagnosticsRecord>& records, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << csv_header() << '\n';
  for (const DiagnosticsRecord& r : records) os << csv_row(r) << '\n';
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace boltzwave
