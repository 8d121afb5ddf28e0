#include "boltzwave/collision_tensor.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "boltzwave/errors.hpp"
#include "boltzwave/parallel.hpp"

static_assert(std::endian::native == std::endian::little,
              "cache format is little-endian; big-endian hosts are unsupported");

namespace boltzwave {

namespace {

bool opt_equal(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || *a == *b;
}

}  // namespace

bool TensorMeta::same_build(const TensorMeta& o) const {
  return level == o.level && delta == o.delta && kernel.gamma == o.kernel.gamma &&
         kernel.theta_b == o.kernel.theta_b && kernel.b0 == o.kernel.b0 &&
         opt_equal(kernel.lambda, o.kernel.lambda) && seed == o.seed &&
         samples_per_pair == o.samples_per_pair && unweighted == o.unweighted;
}

std::size_t LossTensor::nonzero_count() const {
  std::size_t count = 0;
  for (double x : m)
    if (x != 0.0) ++count;
  return count;
}

namespace {

struct KGroup {
  std::vector<std::uint32_t> l, lp;
  std::vector<double> w;
  double dropped_weight = 0.0;
  double total_weight = 0.0;
};

/// Sort raw (key, weight) samples of one k-group and merge duplicates.
/// stable_sort keeps the accumulation order deterministic.
void freeze_group(std::vector<std::pair<std::uint64_t, double>>& raw, std::size_t n,
                  KGroup& out) {
  std::stable_sort(raw.begin(), raw.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < raw.size();) {
    const std::uint64_t key = raw[i].first;
    double acc = 0.0;
    while (i < raw.size() && raw[i].first == key) acc += raw[i++].second;
    out.l.push_back(static_cast<std::uint32_t>(key / n));
    out.lp.push_back(static_cast<std::uint32_t>(key % n));
    out.w.push_back(acc);
  }
}

}  // namespace

CollisionTensors build(const FilteredBasis& basis, const KernelSpec& spec,
                       std::uint64_t samples_per_pair, std::uint64_t seed,
                       const BuildOptions& opts) {
  spec.validate();
  if (samples_per_pair < 1) throw ConfigError("samples_per_pair must be >= 1");
  const auto t_start = std::chrono::steady_clock::now();

  const std::size_t n = basis.size();
  const double amp3 = std::pow(basis.amplitude(), 3);
  const double vol = basis.cell_volume();
  const double w_base = vol * vol * 4.0 * M_PI / static_cast<double>(samples_per_pair);
  const bool unweighted = opts.unweighted;

  std::vector<Box3> cell(n);
  for (std::size_t i = 0; i < n; ++i) cell[i] = basis.bar_cell(i).box();

  CollisionTensors out;
  out.loss.n = n;
  out.loss.m.assign(n * n, 0.0);

  std::vector<KGroup> groups(n);
  std::atomic<std::size_t> entries_so_far{0};
  std::atomic<bool> over_cap{false};

  parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<std::uint64_t, double>> raw;
    for (std::size_t k = begin; k < end; ++k) {
      if (over_cap.load(std::memory_order_relaxed)) return;
      raw.clear();
      double* loss_row = &out.loss.m[k * n];
      const Box3& ck = cell[k];
      for (std::size_t ks = 0; ks < n; ++ks) {
        const Box3& cs = cell[ks];
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(k) * n + ks);
        for (std::uint64_t s = 0; s < samples_per_pair; ++s) {
          // Fixed draw order: vb, vb*, sigma. Part of the cache format.
          BarVelocity vb{{rng.uniform(ck.lo[0], ck.hi[0]), rng.uniform(ck.lo[1], ck.hi[1]),
                          rng.uniform(ck.lo[2], ck.hi[2])}};
          BarVelocity vbs{{rng.uniform(cs.lo[0], cs.hi[0]), rng.uniform(cs.lo[1], cs.hi[1]),
                           rng.uniform(cs.lo[2], cs.hi[2])}};
          const Vec3 sigma = rng.unit_sphere();

          const Velocity v = phi_inv(vb);
          const Velocity vs = phi_inv(vbs);
          const double b = kernel_eval(spec, v, vs, sigma);
          if (b == 0.0) continue;
          const double w = w_base * jacobian_factor(vb) * jacobian_factor(vbs) * b * amp3;

          loss_row[ks] += unweighted ? w : w / bracket_sq(vs);

          const auto [v1, v2] = post_collision(v, vs, sigma);
          const double gw =
              unweighted ? w : w * bracket_sq(v) / (bracket_sq(v1) * bracket_sq(v2));
          groups[k].total_weight += gw;
          const auto cell_lp = basis.locate(phi(v1));
          const auto cell_l = basis.locate(phi(v2));
          if (cell_lp && cell_l) {
            raw.emplace_back(static_cast<std::uint64_t>(*cell_l) * n + *cell_lp, gw);
          } else {
            groups[k].dropped_weight += gw;
          }
        }
      }
      freeze_group(raw, n, groups[k]);
      const std::size_t total =
          entries_so_far.fetch_add(groups[k].w.size(), std::memory_order_relaxed) +
          groups[k].w.size();
      if (total > opts.gain_entry_cap) over_cap.store(true, std::memory_order_relaxed);
    }
  });

  if (over_cap.load())
    throw ConfigError("gain tensor exceeds the configured entry cap of " +
                      std::to_string(opts.gain_entry_cap) + " entries");

  // Deterministic assembly in k order.
  std::size_t total_entries = 0;
  double dropped = 0.0, total_weight = 0.0;
  for (const KGroup& g : groups) {
    total_entries += g.w.size();
    dropped += g.dropped_weight;
    total_weight += g.total_weight;
  }
  out.gain.row_offset.resize(n + 1);
  out.gain.l.reserve(total_entries);
  out.gain.lp.reserve(total_entries);
  out.gain.w.reserve(total_entries);
  for (std::size_t k = 0; k < n; ++k) {
    out.gain.row_offset[k] = out.gain.w.size();
    out.gain.l.insert(out.gain.l.end(), groups[k].l.begin(), groups[k].l.end());
    out.gain.lp.insert(out.gain.lp.end(), groups[k].lp.begin(), groups[k].lp.end());
    out.gain.w.insert(out.gain.w.end(), groups[k].w.begin(), groups[k].w.end());
    groups[k] = KGroup{};  // release as we go
  }
  out.gain.row_offset[n] = out.gain.w.size();

  out.meta.level = basis.level();
  out.meta.delta = basis.filter().delta;
  out.meta.kernel = spec;
  out.meta.seed = seed;
  out.meta.samples_per_pair = samples_per_pair;
  out.meta.unweighted = unweighted;
  out.meta.dropped_mass_fraction = total_weight > 0.0 ? dropped / total_weight : 0.0;
  out.meta.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

namespace {

/// Gauss nodes of a composite rule over [lo, hi]: `subdiv` equal panels,
/// `order` points each.
void composite_axis(const GaussRule& rule, int order, int subdiv, double lo, double hi,
                    std::vector<double>& xs, std::vector<double>& ws) {
  xs.clear();
  ws.clear();
  const double panel = (hi - lo) / subdiv;
  for (int p = 0; p < subdiv; ++p) {
    const double mid = lo + panel * (p + 0.5);
    for (int i = 0; i < order; ++i) {
      xs.push_back(mid + 0.5 * panel * rule.nodes[i]);
      ws.push_back(0.5 * panel * rule.weights[i]);
    }
  }
}

/// Flattened quadrature nodes of one bar cell: physical velocity, the pure
/// product weight, the Jacobian, and the inverse bracket weight.
struct CellNodes {
  std::vector<Vec3> v;
  std::vector<double> w_pure;
  std::vector<double> jac;
  std::vector<double> inv_br;

  void build(const GaussRule& rule, int order, int subdiv, const Box3& box) {
    std::vector<double> xs[3], ws[3];
    for (int d = 0; d < 3; ++d)
      composite_axis(rule, order, subdiv, box.lo[d], box.hi[d], xs[d], ws[d]);
    const std::size_t m = xs[0].size();
    v.clear();
    w_pure.clear();
    jac.clear();
    inv_br.clear();
    v.reserve(m * m * m);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        for (std::size_t c = 0; c < m; ++c) {
          const BarVelocity vb{{xs[0][a], xs[1][b], xs[2][c]}};
          const Velocity vel = phi_inv(vb);
          v.push_back(vel.c);
          w_pure.push_back(ws[0][a] * ws[1][b] * ws[2][c]);
          jac.push_back(jacobian_factor(vb));
          inv_br.push_back(1.0 / bracket_sq(vel));
        }
  }
};

double rel_speed_pow(double r, double gamma) {
  return gamma == 0.5 ? std::sqrt(r) : std::pow(r, gamma);
}

}  // namespace

CollisionTensors oracle_build(const FilteredBasis& basis, const KernelSpec& spec,
                              const OracleOptions& opts,
                              std::vector<double>* gain_second_moment) {
  spec.validate();
  const std::size_t n = basis.size();
  if (n > 64) throw ConfigError("oracle_build is guarded to <= 64 kept cells, got " +
                                std::to_string(n));
  if (gain_second_moment) gain_second_moment->assign(n * n * n, 0.0);

  const double amp3 = std::pow(basis.amplitude(), 3);
  const bool unweighted = opts.unweighted;
  const double cos_band = std::cos(spec.theta_b);
  const double band_area = 4.0 * M_PI * cos_band;

  std::vector<Box3> cell(n);
  for (std::size_t i = 0; i < n; ++i) cell[i] = basis.bar_cell(i).box();

  CollisionTensors out;
  out.loss.n = n;
  out.loss.m.assign(n * n, 0.0);
  std::vector<std::vector<double>> gain_dense(n);
  std::vector<double> dropped(n, 0.0), total(n, 0.0);

  // Loss pass: no angular dimension (the band integral of b is analytic), so
  // a finer composite rule is affordable. The integrand is only C^0 where the
  // max norm switches axes inside a cell, which limits plain Gauss.
  {
    const GaussRule& loss_rule = gauss_legendre(opts.loss_order);
    std::vector<CellNodes> nodes(n);
    for (std::size_t i = 0; i < n; ++i)
      nodes[i].build(loss_rule, opts.loss_order, opts.loss_subdiv, cell[i]);
    const bool truncated = spec.lambda.has_value();
    const double lambda = spec.lambda.value_or(0.0);
    parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        const CellNodes& outer = nodes[k];
        for (std::size_t ks = 0; ks < n; ++ks) {
          const CellNodes& inner = nodes[ks];
          double acc = 0.0;
          for (std::size_t i = 0; i < outer.v.size(); ++i) {
            const Vec3 v = outer.v[i];
            const double wv = outer.w_pure[i] * outer.jac[i];
            double sub = 0.0;
            for (std::size_t j = 0; j < inner.v.size(); ++j) {
              const double r = norm2(v - inner.v[j]);
              if (r < 1e-300) continue;
              const double reff = truncated ? std::min(r, lambda) : r;
              sub += inner.w_pure[j] * inner.jac[j] * rel_speed_pow(reff, spec.gamma) *
                     (unweighted ? 1.0 : inner.inv_br[j]);
            }
            acc += wv * sub;
          }
          out.loss.m[k * n + ks] = acc * amp3 * band_area * spec.b0;
        }
      }
    });
  }

  // Gain pass: Gauss over both cells, equal-area covering of the angular
  // band in sigma. Each volume node shifts the covering in both band
  // coordinates (Cranley-Patterson) so cell-boundary aliasing averages out
  // across the grid; the azimuth advances by the golden angle through an
  // incremental rotation, keeping the inner loop trig-free.
  {
    const GaussRule& gain_rule = gauss_legendre(opts.gain_order);
    const int ns = opts.n_sigma;
    const double w_sigma = band_area / ns;
    const double golden_angle = 2.0 * M_PI * 0.61803398874989484820;
    const double cos_g = std::cos(golden_angle), sin_g = std::sin(golden_angle);
    std::vector<CellNodes> nodes(n);
    for (std::size_t i = 0; i < n; ++i) nodes[i].build(gain_rule, opts.gain_order, 1, cell[i]);
    const bool truncated = spec.lambda.has_value();
    const double lambda = spec.lambda.value_or(0.0);

    parallel_chunks(n, opts.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        gain_dense[k].assign(n * n, 0.0);
        double* sq_row = gain_second_moment ? gain_second_moment->data() + k * n * n : nullptr;
        const CellNodes& outer = nodes[k];
        for (std::size_t ks = 0; ks < n; ++ks) {
          const CellNodes& inner = nodes[ks];
          std::uint64_t node_counter =
              (static_cast<std::uint64_t>(k) * n + ks) * 0x9e3779b97f4a7c15ULL;
          for (std::size_t i = 0; i < outer.v.size(); ++i) {
            const Vec3 v = outer.v[i];
            const double wji = outer.w_pure[i] * outer.jac[i];
            const double brv = unweighted ? 1.0 : 1.0 / outer.inv_br[i];
            for (std::size_t j = 0; j < inner.v.size(); ++j) {
              const double qw_pure = outer.w_pure[i] * inner.w_pure[j] * w_sigma;
              const Vec3 u = v - inner.v[j];
              const double r = norm2(u);
              if (r < 1e-300) continue;
              const double reff = truncated ? std::min(r, lambda) : r;
              const double base = wji * inner.w_pure[j] * inner.jac[j] * w_sigma *
                                  rel_speed_pow(reff, spec.gamma) * spec.b0 * amp3 * brv;
              const double inv_qw = 1.0 / qw_pure;
              const Vec3 center = (v + inner.v[j]) * 0.5;

              const Vec3 uhat = u / r;
              Vec3 e1 = std::abs(uhat.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
              e1 = e1 - uhat * dot(e1, uhat);
              e1 = e1 / norm2(e1);
              const Vec3 e2{uhat.y * e1.z - uhat.z * e1.y, uhat.z * e1.x - uhat.x * e1.z,
                            uhat.x * e1.y - uhat.y * e1.x};

              std::uint64_t h = ++node_counter;
              const std::uint64_t bits = splitmix64(h);
              const double shift_t = static_cast<double>(bits >> 11) * 0x1.0p-53;
              const double phi0 =
                  2.0 * M_PI * (static_cast<double>(bits & 0x7FFFFFFF) * 0x1.0p-31);
              double cp = std::cos(phi0), sp = std::sin(phi0);
              const double half_r = 0.5 * r;
              for (int is = 0; is < ns; ++is) {
                double tfrac = (is + 0.5) / ns + shift_t;
                tfrac -= std::floor(tfrac);
                const double ct = cos_band * (2.0 * tfrac - 1.0);
                const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
                const Vec3 sigma = uhat * ct + (e1 * cp + e2 * sp) * st;
                const double cn = cp * cos_g - sp * sin_g;
                sp = sp * cos_g + cp * sin_g;
                cp = cn;

                const Vec3 off = sigma * half_r;
                const Velocity v1{center + off}, v2{center - off};
                const auto cell_lp = basis.locate(phi(v1));
                const auto cell_l = basis.locate(phi(v2));
                const double gw =
                    unweighted ? base : base / (bracket_sq(v1) * bracket_sq(v2));
                total[k] += gw;
                if (cell_lp && cell_l) {
                  const std::size_t key = *cell_l * n + *cell_lp;
                  gain_dense[k][key] += gw;
                  if (sq_row) sq_row[key] += gw * gw * inv_qw;
                } else {
                  dropped[k] += gw;
                }
              }
            }
          }
        }
      }
    });
  }

  out.gain.row_offset.resize(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    out.gain.row_offset[k] = out.gain.w.size();
    for (std::size_t key = 0; key < n * n; ++key) {
      const double w = gain_dense[k][key];
      if (w != 0.0) {
        out.gain.l.push_back(static_cast<std::uint32_t>(key / n));
        out.gain.lp.push_back(static_cast<std::uint32_t>(key % n));
        out.gain.w.push_back(w);
      }
    }
    gain_dense[k].clear();
    gain_dense[k].shrink_to_fit();
  }
  out.gain.row_offset[n] = out.gain.w.size();

  double drop_sum = 0.0, total_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    drop_sum += dropped[k];
    total_sum += total[k];
  }
  out.meta.level = basis.level();
  out.meta.delta = basis.filter().delta;
  out.meta.kernel = spec;
  out.meta.seed = 0;
  out.meta.samples_per_pair = 0;
  out.meta.unweighted = unweighted;
  out.meta.dropped_mass_fraction = total_sum > 0.0 ? drop_sum / total_sum : 0.0;
  return out;
}

double oracle_gain_entry(const FilteredBasis& basis, const KernelSpec& spec, std::size_t k,
                         std::size_t l, std::size_t lp, const OracleEntryOptions& opts) {
  spec.validate();
  // Involuted representation of the same integral: the collision map swaps
  // sampled and produced pairs, so the entry equals
  //   int_{vb in cell lp} int_{vbs in cell l} int_band B <v>^{-2} <v*>^{-2}
  //       <v'>^2 chi(cell(phi(v')) = k) chi(phi(v'*) kept) A^3 J J,
  // with both density cells now plain integration boxes.
  const double amp3 = std::pow(basis.amplitude(), 3);
  const double cos_band = std::cos(spec.theta_b);
  const double band_area = 4.0 * M_PI * cos_band;
  const int q = opts.cell_order;
  const int ns = opts.n_sigma;
  const double w_sigma = band_area / ns;
  const GaussRule& rule = gauss_legendre(q);
  const Box3 box_v = basis.bar_cell(lp).box();
  const Box3 box_vs = basis.bar_cell(l).box();
  const double golden_angle = 2.0 * M_PI * 0.61803398874989484820;
  const double cos_g = std::cos(golden_angle), sin_g = std::sin(golden_angle);

  std::vector<double> xs[3], ws[3], ys[3], vs_w[3];
  for (int d = 0; d < 3; ++d) {
    composite_axis(rule, q, 1, box_v.lo[d], box_v.hi[d], xs[d], ws[d]);
    composite_axis(rule, q, 1, box_vs.lo[d], box_vs.hi[d], ys[d], vs_w[d]);
  }

  double acc = 0.0;
  std::uint64_t node_counter = (static_cast<std::uint64_t>(k) * basis.size() + l) * 31 + lp;
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b)
      for (int c = 0; c < q; ++c) {
        const BarVelocity vb{{xs[0][a], xs[1][b], xs[2][c]}};
        const Velocity v = phi_inv(vb);
        const double wv = ws[0][a] * ws[1][b] * ws[2][c] * jacobian_factor(vb);
        const double brv = opts.unweighted ? 1.0 : 1.0 / bracket_sq(v);
        for (int d1 = 0; d1 < q; ++d1)
          for (int e = 0; e < q; ++e)
            for (int f = 0; f < q; ++f) {
              const BarVelocity vbs{{ys[0][d1], ys[1][e], ys[2][f]}};
              const Velocity vs = phi_inv(vbs);
              const double w6 =
                  wv * vs_w[0][d1] * vs_w[1][e] * vs_w[2][f] * jacobian_factor(vbs);
              const Vec3 u = v.c - vs.c;
              const double r = norm2(u);
              if (r < 1e-300) continue;
              const double reff = spec.lambda ? std::min(r, *spec.lambda) : r;
              const double base = w6 * rel_speed_pow(reff, spec.gamma) * spec.b0 * amp3 * w_sigma *
                                  brv * (opts.unweighted ? 1.0 : 1.0 / bracket_sq(vs));
              const Vec3 center = (v.c + vs.c) * 0.5;

              const Vec3 uhat = u / r;
              Vec3 e1 = std::abs(uhat.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
              e1 = e1 - uhat * dot(e1, uhat);
              e1 = e1 / norm2(e1);
              const Vec3 e2{uhat.y * e1.z - uhat.z * e1.y, uhat.z * e1.x - uhat.x * e1.z,
                            uhat.x * e1.y - uhat.y * e1.x};

              std::uint64_t h = ++node_counter;
              const std::uint64_t bits = splitmix64(h);
              const double shift_t = static_cast<double>(bits >> 11) * 0x1.0p-53;
              const double phi0 =
                  2.0 * M_PI * (static_cast<double>(bits & 0x7FFFFFFF) * 0x1.0p-31);
              double cp = std::cos(phi0), sp = std::sin(phi0);
              for (int is = 0; is < ns; ++is) {
                double tfrac = (is + 0.5) / ns + shift_t;
                tfrac -= std::floor(tfrac);
                const double ct = cos_band * (2.0 * tfrac - 1.0);
                const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
                const Vec3 sigma = uhat * ct + (e1 * cp + e2 * sp) * st;
                const double cn = cp * cos_g - sp * sin_g;
                sp = sp * cos_g + cp * sin_g;
                cp = cn;

                const Vec3 off = sigma * (0.5 * r);
                const Velocity v1{center + off}, v2{center - off};
                const auto cell_k = basis.locate(phi(v1));
                if (!cell_k || *cell_k != k) continue;
                if (!basis.locate(phi(v2))) continue;
                acc += base * (opts.unweighted ? 1.0 : bracket_sq(v1));
              }
            }
      }
  return acc;
}

void oracle_refine_row(const FilteredBasis& basis, const KernelSpec& spec, std::size_t k,
                       std::vector<double>& value, std::vector<double>& second_moment,
                       const OracleRowOptions& opts) {
  spec.validate();
  const std::size_t n = basis.size();
  if (n > 64) throw ConfigError("oracle_refine_row is guarded to <= 64 kept cells");
  value.assign(n * n, 0.0);
  second_moment.assign(n * n, 0.0);

  const double amp3 = std::pow(basis.amplitude(), 3);
  const double cos_band = std::cos(spec.theta_b);
  const double band_area = 4.0 * M_PI * cos_band;
  const int ns = opts.n_sigma;
  const double w_sigma = band_area / ns;
  const bool unweighted = opts.unweighted;
  const double golden_angle = 2.0 * M_PI * 0.61803398874989484820;
  const double cos_g = std::cos(golden_angle), sin_g = std::sin(golden_angle);

  const Box3 box_k = basis.bar_cell(k).box();
  const GaussRule& cell_rule = gauss_legendre(opts.cell_order);
  const GaussRule& kept_rule = gauss_legendre(opts.kept_order);
  std::vector<double> xs[3], ws[3], ys[3], vs_w[3];
  for (int d = 0; d < 3; ++d) {
    composite_axis(cell_rule, opts.cell_order, 1, box_k.lo[d], box_k.hi[d], xs[d], ws[d]);
    // Kept box with panels aligned to the cell grid: J kinks sit on edges.
    composite_axis(kept_rule, opts.kept_order, 2 * basis.khat() + 1, -basis.zeta(),
                   basis.zeta(), ys[d], vs_w[d]);
  }
  const std::size_t mq = xs[0].size(), mk = ys[0].size();

  std::uint64_t node_counter = k * 0x9e3779b97f4a7c15ULL;
  for (std::size_t a = 0; a < mq; ++a)
    for (std::size_t b = 0; b < mq; ++b)
      for (std::size_t c = 0; c < mq; ++c) {
        const BarVelocity vb{{xs[0][a], xs[1][b], xs[2][c]}};
        const Velocity v = phi_inv(vb);
        const double wv_pure = ws[0][a] * ws[1][b] * ws[2][c];
        const double jv = jacobian_factor(vb);
        const double brv = unweighted ? 1.0 : bracket_sq(v);
        for (std::size_t d1 = 0; d1 < mk; ++d1)
          for (std::size_t e = 0; e < mk; ++e)
            for (std::size_t f = 0; f < mk; ++f) {
              const BarVelocity vbs{{ys[0][d1], ys[1][e], ys[2][f]}};
              const Velocity vs = phi_inv(vbs);
              const double qw_pure =
                  wv_pure * vs_w[0][d1] * vs_w[1][e] * vs_w[2][f] * w_sigma;
              const Vec3 u = v.c - vs.c;
              const double r = norm2(u);
              if (r < 1e-300) continue;
              const double reff = spec.lambda ? std::min(r, *spec.lambda) : r;
              const double base = qw_pure * jv * jacobian_factor(vbs) *
                                  rel_speed_pow(reff, spec.gamma) * spec.b0 * amp3 * brv;
              const double inv_qw = 1.0 / qw_pure;
              const Vec3 center = (v.c + vs.c) * 0.5;

              const Vec3 uhat = u / r;
              Vec3 e1 = std::abs(uhat.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
              e1 = e1 - uhat * dot(e1, uhat);
              e1 = e1 / norm2(e1);
              const Vec3 e2{uhat.y * e1.z - uhat.z * e1.y, uhat.z * e1.x - uhat.x * e1.z,
                            uhat.x * e1.y - uhat.y * e1.x};

              std::uint64_t h = ++node_counter;
              const std::uint64_t bits = splitmix64(h);
              const double shift_t = static_cast<double>(bits >> 11) * 0x1.0p-53;
              const double phi0 =
                  2.0 * M_PI * (static_cast<double>(bits & 0x7FFFFFFF) * 0x1.0p-31);
              double cp = std::cos(phi0), sp = std::sin(phi0);
              for (int is = 0; is < ns; ++is) {
                double tfrac = (is + 0.5) / ns + shift_t;
                tfrac -= std::floor(tfrac);
                const double ct = cos_band * (2.0 * tfrac - 1.0);
                const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
                const Vec3 sigma = uhat * ct + (e1 * cp + e2 * sp) * st;
                const double cn = cp * cos_g - sp * sin_g;
                sp = sp * cos_g + cp * sin_g;
                cp = cn;

                const Vec3 off = sigma * (0.5 * r);
                const Velocity v1{center + off}, v2{center - off};
                const auto cell_lp = basis.locate(phi(v1));
                const auto cell_l = basis.locate(phi(v2));
                if (!cell_lp || !cell_l) continue;
                const double gw =
                    unweighted ? base : base / (bracket_sq(v1) * bracket_sq(v2));
                const std::size_t key = *cell_l * n + *cell_lp;
                value[key] += gw;
                second_moment[key] += gw * gw * inv_qw;
              }
            }
      }
}

// ---------------------------------------------------------------------------
// Cache file I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'B', 'W', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_update(std::uint64_t& h, const char* data, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= kFnvPrime;
  }
}

template <typename T>
void put(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));
}

template <typename T>
T take(const char*& p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

constexpr std::size_t kLossRecord = 4 + 4 + 8;
constexpr std::size_t kGainRecord = 4 + 4 + 4 + 8;

std::string header_bytes(const CollisionTensors& t, std::uint64_t checksum) {
  std::string h;
  h.append(kMagic, 4);
  put<std::uint32_t>(h, kVersion);
  put<std::uint32_t>(h, static_cast<std::uint32_t>(t.meta.level));
  put<double>(h, t.meta.delta);
  put<double>(h, t.meta.kernel.gamma);
  put<double>(h, t.meta.kernel.theta_b);
  put<double>(h, t.meta.kernel.b0);
  put<std::uint8_t>(h, t.meta.kernel.lambda ? 1 : 0);
  put<double>(h, t.meta.kernel.lambda.value_or(0.0));
  put<std::uint8_t>(h, t.meta.unweighted ? 1 : 0);
  put<std::uint64_t>(h, t.meta.seed);
  put<std::uint64_t>(h, t.meta.samples_per_pair);
  put<std::uint64_t>(h, static_cast<std::uint64_t>(t.loss.nonzero_count()));
  put<std::uint64_t>(h, static_cast<std::uint64_t>(t.gain.entry_count()));
  put<double>(h, t.meta.dropped_mass_fraction);
  put<std::uint64_t>(h, checksum);
  return h;
}

}  // namespace

void save(const CollisionTensors& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);

  const std::string header = header_bytes(t, 0);
  os.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::uint64_t checksum = kFnvOffset;
  std::string chunk;
  chunk.reserve(1 << 20);
  auto flush = [&] {
    fnv_update(checksum, chunk.data(), chunk.size());
    os.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    chunk.clear();
  };

  const std::size_t n = t.loss.n;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      const double w = t.loss.at(k, l);
      if (w == 0.0) continue;
      put<std::uint32_t>(chunk, static_cast<std::uint32_t>(k));
      put<std::uint32_t>(chunk, static_cast<std::uint32_t>(l));
      put<double>(chunk, w);
      if (chunk.size() >= (1 << 20)) flush();
    }
  for (std::size_t k = 0; k < n; ++k)
    for (std::uint64_t i = t.gain.row_offset[k]; i < t.gain.row_offset[k + 1]; ++i) {
      put<std::uint32_t>(chunk, static_cast<std::uint32_t>(k));
      put<std::uint32_t>(chunk, t.gain.l[i]);
      put<std::uint32_t>(chunk, t.gain.lp[i]);
      put<double>(chunk, t.gain.w[i]);
      if (chunk.size() >= (1 << 20)) flush();
    }
  flush();

  // Patch the checksum, the final u64 of the header.
  const std::string final_header = header_bytes(t, checksum);
  os.seekp(static_cast<std::streamoff>(final_header.size() - 8));
  os.write(final_header.data() + final_header.size() - 8, 8);
  if (!os) throw IoError("write failed: " + path);
}

CollisionTensors load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);

  CollisionTensors t;
  const std::size_t header_size = header_bytes(t, 0).size();
  std::string header(header_size, '\0');
  is.read(header.data(), static_cast<std::streamsize>(header_size));
  if (static_cast<std::size_t>(is.gcount()) != header_size)
    throw IoError("corrupt cache (truncated header): " + path);

  const char* p = header.data();
  if (std::memcmp(p, kMagic, 4) != 0) throw IoError("not a tensor cache (bad magic): " + path);
  p += 4;
  const auto version = take<std::uint32_t>(p);
  if (version != kVersion)
    throw IoError("unsupported cache version " + std::to_string(version) + ": " + path);
  t.meta.level = static_cast<int>(take<std::uint32_t>(p));
  t.meta.delta = take<double>(p);
  t.meta.kernel.gamma = take<double>(p);
  t.meta.kernel.theta_b = take<double>(p);
  t.meta.kernel.b0 = take<double>(p);
  const bool has_lambda = take<std::uint8_t>(p) != 0;
  const double lambda = take<double>(p);
  t.meta.kernel.lambda = has_lambda ? std::optional<double>(lambda) : std::nullopt;
  t.meta.unweighted = take<std::uint8_t>(p) != 0;
  t.meta.seed = take<std::uint64_t>(p);
  t.meta.samples_per_pair = take<std::uint64_t>(p);
  const auto loss_count = take<std::uint64_t>(p);
  const auto gain_count = take<std::uint64_t>(p);
  t.meta.dropped_mass_fraction = take<double>(p);
  const auto stored_checksum = take<std::uint64_t>(p);

  const int khat = khat_of(t.meta.level, t.meta.delta);
  const std::size_t n = static_cast<std::size_t>(2 * khat + 1) * (2 * khat + 1) * (2 * khat + 1);
  t.loss.n = n;
  t.loss.m.assign(n * n, 0.0);

  std::uint64_t checksum = kFnvOffset;
  std::vector<char> buf;
  auto read_block = [&](std::size_t bytes) {
    buf.resize(bytes);
    is.read(buf.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(is.gcount()) != bytes)
      throw IoError("corrupt cache (truncated payload): " + path);
    fnv_update(checksum, buf.data(), bytes);
  };

  read_block(loss_count * kLossRecord);
  {
    const char* q = buf.data();
    for (std::uint64_t i = 0; i < loss_count; ++i) {
      const auto k = take<std::uint32_t>(q);
      const auto l = take<std::uint32_t>(q);
      const double w = take<double>(q);
      if (k >= n || l >= n) throw IoError("corrupt cache (loss index out of range): " + path);
      t.loss.m[static_cast<std::size_t>(k) * n + l] = w;
    }
  }

  read_block(gain_count * kGainRecord);
  {
    t.gain.row_offset.assign(n + 1, 0);
    t.gain.l.resize(gain_count);
    t.gain.lp.resize(gain_count);
    t.gain.w.resize(gain_count);
    const char* q = buf.data();
    std::uint32_t prev_k = 0;
    for (std::uint64_t i = 0; i < gain_count; ++i) {
      const auto k = take<std::uint32_t>(q);
      const auto l = take<std::uint32_t>(q);
      const auto lp = take<std::uint32_t>(q);
      const double w = take<double>(q);
      if (k >= n || l >= n || lp >= n)
        throw IoError("corrupt cache (gain index out of range): " + path);
      if (k < prev_k) throw IoError("corrupt cache (gain rows out of order): " + path);
      prev_k = k;
      t.gain.l[i] = l;
      t.gain.lp[i] = lp;
      t.gain.w[i] = w;
      t.gain.row_offset[k + 1] = i + 1;
    }
    for (std::size_t k = 1; k <= n; ++k)
      t.gain.row_offset[k] = std::max(t.gain.row_offset[k], t.gain.row_offset[k - 1]);
  }

  is.peek();
  if (!is.eof()) throw IoError("corrupt cache (trailing bytes): " + path);
  if (checksum != stored_checksum) throw IoError("corrupt cache (checksum mismatch): " + path);
  return t;
}

CollisionTensors load_matching(const std::string& path, const TensorMeta& expected) {
  CollisionTensors t = load(path);
  if (!t.meta.same_build(expected)) {
    throw ConfigError(
        "tensor cache parameter mismatch for " + path + ": cached (N=" +
        std::to_string(t.meta.level) + ", delta=" + std::to_string(t.meta.delta) +
        ", gamma=" + std::to_string(t.meta.kernel.gamma) +
        ", seed=" + std::to_string(t.meta.seed) +
        ", samples=" + std::to_string(t.meta.samples_per_pair) +
        ") vs requested (N=" + std::to_string(expected.level) +
        ", delta=" + std::to_string(expected.delta) +
        ", gamma=" + std::to_string(expected.kernel.gamma) +
        ", seed=" + std::to_string(expected.seed) +
        ", samples=" + std::to_string(expected.samples_per_pair) + ")");
  }
  return t;
}

}  // namespace boltzwave
