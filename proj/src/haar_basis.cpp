#include "boltzwave/haar_basis.hpp"

#include <cmath>
#include <string>

#include "boltzwave/errors.hpp"
#include "boltzwave/parallel.hpp"

namespace boltzwave {

int khat_of(int level, double delta) {
  if (level < 1) throw ConfigError("level must be >= 1, got " + std::to_string(level));
  if (!(delta > 0.0 && delta < 1.0))
    throw ConfigError("delta must lie in (0,1), got " + std::to_string(delta));
  const double scaled = delta * std::ldexp(1.0, level);
  if (scaled <= 1.0)
    throw ConfigError("delta * 2^N <= 1 leaves an empty basis (N=" + std::to_string(level) +
                      ", delta=" + std::to_string(delta) + ")");
  const int khat = static_cast<int>(std::floor((scaled - 1.0) / 2.0));
  return khat < 0 ? 0 : khat;
}

FilteredBasis::FilteredBasis(int level, double delta) : level_(level) {
  filter_.delta = delta;
  filter_.khat = khat_of(level, delta);
  halfwidth_ = std::ldexp(1.0, -level);
  zeta_ = halfwidth_ * (2.0 * filter_.khat + 1.0);
  amplitude_ = std::pow(2.0, 1.5 * (level - 1));

  const int khat = filter_.khat;
  const int width = 2 * khat + 1;
  kept_.reserve(static_cast<std::size_t>(width) * width * width);
  for (int k1 = -khat; k1 <= khat; ++k1)
    for (int k2 = -khat; k2 <= khat; ++k2)
      for (int k3 = -khat; k3 <= khat; ++k3) kept_.push_back(BasisIndex{level, {k1, k2, k3}});
}

std::size_t FilteredBasis::flat_of(const std::array<int, 3>& k) const {
  const int khat = filter_.khat;
  const std::size_t width = static_cast<std::size_t>(2 * khat + 1);
  return (static_cast<std::size_t>(k[0] + khat) * width + static_cast<std::size_t>(k[1] + khat)) *
             width +
         static_cast<std::size_t>(k[2] + khat);
}

CellGeometry FilteredBasis::bar_cell(const BasisIndex& idx) const {
  const int boundary = 1 << (idx.level - 1);
  CellGeometry geo;
  geo.amplitude = amplitude_;
  const double h = halfwidth_;
  for (int d = 0; d < 3; ++d) {
    if (idx.k[d] == boundary)
      throw ConfigError("bar_cell: boundary-straddling index k=" + std::to_string(idx.k[d]) +
                        " has no single-interval support");
    geo.bar_lo[d] = h * (2.0 * idx.k[d] - 1.0);
    geo.bar_hi[d] = h * (2.0 * idx.k[d] + 1.0);
  }
  return geo;
}

FilteredBasis::VExtent FilteredBasis::v_cell_extent(const BasisIndex& idx) const {
  const CellGeometry geo = bar_cell(idx);
  // Candidate coordinates per axis: both endpoints plus the min-|.| point,
  // which is where the max norm of the other axes can be smallest.
  std::array<std::array<double, 3>, 3> cand{};
  for (int d = 0; d < 3; ++d) {
    const double lo = geo.bar_lo[d], hi = geo.bar_hi[d];
    const double minabs = (lo <= 0.0 && 0.0 <= hi) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
    cand[d] = {lo, hi, minabs * (lo > 0.0 ? 1.0 : (hi < 0.0 ? -1.0 : 1.0))};
  }
  VExtent ext;
  for (int d = 0; d < 3; ++d) {
    ext.lo[d] = 1e300;
    ext.hi[d] = -1e300;
  }
  for (double a : cand[0])
    for (double b : cand[1])
      for (double c : cand[2]) {
        const Velocity v = phi_inv(BarVelocity{{a, b, c}});
        for (int d = 0; d < 3; ++d) {
          ext.lo[d] = std::min(ext.lo[d], v.c[d]);
          ext.hi[d] = std::max(ext.hi[d], v.c[d]);
        }
      }
  return ext;
}

std::optional<std::size_t> FilteredBasis::locate(const BarVelocity& vb) const {
  const double scale = std::ldexp(1.0, level_);
  std::array<int, 3> k{};
  for (int d = 0; d < 3; ++d) {
    // Half-open cells [h(2k-1), h(2k+1)): k = floor((x*2^N + 1)/2).
    const double t = std::floor((vb.c[d] * scale + 1.0) * 0.5);
    if (std::abs(t) > filter_.khat) return std::nullopt;
    k[d] = static_cast<int>(t);
  }
  return flat_of(k);
}

double FilteredBasis::eval_basis(const BasisIndex& idx, const BarVelocity& vb) const {
  const auto flat = locate(vb);
  if (!flat) return 0.0;
  return kept_[*flat] == idx ? amplitude_ : 0.0;
}

std::vector<double> FilteredBasis::project(const std::function<double(const BarVelocity&)>& g,
                                           int quad_order, int threads) const {
  gauss_legendre(quad_order);  // validates the order up front
  std::vector<double> coeffs(kept_.size(), 0.0);
  parallel_chunks(kept_.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const CellGeometry geo = bar_cell(kept_[i]);
      coeffs[i] = amplitude_ * integrate_box(quad_order, geo.box(), [&](const Vec3& p) {
                    return g(BarVelocity{p});
                  });
    }
  });
  return coeffs;
}

double FilteredBasis::reconstruct(const std::vector<double>& coeffs, const BarVelocity& vb) const {
  const auto flat = locate(vb);
  if (!flat) return 0.0;
  return coeffs[*flat] * amplitude_;
}

}  // namespace boltzwave
