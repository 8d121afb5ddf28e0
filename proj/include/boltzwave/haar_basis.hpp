#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "boltzwave/quadrature.hpp"
#include "boltzwave/velocity_map.hpp"

namespace boltzwave {

/// Index of one level-N rearranged periodized Haar cell. Each component lies
/// in {-(2^{N-1}-1), ..., 2^{N-1}}; the value 2^{N-1} names the cell that
/// straddles the cube boundary and is removed by every filter with delta < 1.
struct BasisIndex {
  int level = 0;
  std::array<int, 3> k{};

  bool operator==(const BasisIndex& o) const { return level == o.level && k == o.k; }
};

/// Boundary-removing filter: keeps indices with max_i |k_i| <= khat.
struct FilterSpec {
  double delta = 0.0;
  int khat = 0;
};

/// Per-cell geometry: the bar-space box and the basis-function height.
struct CellGeometry {
  std::array<double, 3> bar_lo{};
  std::array<double, 3> bar_hi{};
  double amplitude = 0.0;

  Box3 box() const { return Box3{bar_lo, bar_hi}; }
};

/// khat = floor((delta * 2^N - 1) / 2), clamped to >= 0.
/// Throws ConfigError when delta * 2^N <= 1 (the filter would keep nothing).
int khat_of(int level, double delta);

/// The level-N filtered Haar basis on (-1,1)^3: the (2*khat+1)^3 kept cells,
/// ordered lexicographically in (k1,k2,k3). Immutable once constructed.
class FilteredBasis {
 public:
  FilteredBasis(int level, double delta);

  int level() const { return level_; }
  const FilterSpec& filter() const { return filter_; }
  int khat() const { return filter_.khat; }

  /// Half-width of the kept bar-space region: kept cells tile (-zeta, zeta)^3.
  double zeta() const { return zeta_; }

  /// Half-width of the kept region in physical velocity space, max norm.
  double v_box_halfwidth() const { return zeta_ / (1.0 - zeta_); }

  /// Number of kept cells, (2*khat+1)^3.
  std::size_t size() const { return kept_.size(); }

  const BasisIndex& index(std::size_t flat) const { return kept_[flat]; }
  std::size_t flat_of(const std::array<int, 3>& k) const;

  /// Basis-function height 2^{3(N-1)/2} (L2-normalized on the cube).
  double amplitude() const { return amplitude_; }

  /// 1-D cell half-width 2^{-N}; bar-cell volume is (2*half)^3.
  double cell_halfwidth() const { return halfwidth_; }
  double cell_volume() const { return 8.0 * halfwidth_ * halfwidth_ * halfwidth_; }

  /// Bar-space box of an interior cell. Throws on the boundary-straddling
  /// index (its support is not a single interval).
  CellGeometry bar_cell(const BasisIndex& idx) const;
  CellGeometry bar_cell(std::size_t flat) const { return bar_cell(kept_[flat]); }

  /// Per-axis bounding box of phi_inv over the cell. The true image is not a
  /// box; extremes are attained on corners and max-norm-critical faces, all of
  /// which lie on the 27-point candidate grid evaluated here.
  struct VExtent {
    std::array<double, 3> lo{};
    std::array<double, 3> hi{};
  };
  VExtent v_cell_extent(const BasisIndex& idx) const;

  /// Kept cell containing vb (half-open convention [lo, hi) per axis), or
  /// nullopt when vb falls outside the kept region.
  std::optional<std::size_t> locate(const BarVelocity& vb) const;

  /// amplitude() if vb lies in the cell of idx, else 0.
  double eval_basis(const BasisIndex& idx, const BarVelocity& vb) const;

  /// L2 projection coefficients of g onto the kept cells: c_k = A * int_cell g.
  /// Filtered-out indices are never produced. Tensor-product Gauss-Legendre
  /// with `quad_order` points per axis.
  std::vector<double> project(const std::function<double(const BarVelocity&)>& g,
                              int quad_order, int threads = 1) const;

  /// Pointwise value of sum_k c_k Phi_k at vb.
  double reconstruct(const std::vector<double>& coeffs, const BarVelocity& vb) const;

 private:
  int level_;
  FilterSpec filter_;
  double zeta_;
  double amplitude_;
  double halfwidth_;
  std::vector<BasisIndex> kept_;
};

}  // namespace boltzwave
