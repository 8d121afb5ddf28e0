#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "boltzwave/haar_basis.hpp"
#include "boltzwave/kernel.hpp"

namespace boltzwave {

/// Everything that determines a tensor build bit-for-bit (given the sampling
/// scheme version, which is the cache format version). build_seconds is
/// populated for reporting but never serialized, so rebuilt caches stay
/// byte-identical.
struct TensorMeta {
  int level = 0;
  double delta = 0.0;
  KernelSpec kernel;
  std::uint64_t seed = 0;
  std::uint64_t samples_per_pair = 0;
  bool unweighted = false;
  double dropped_mass_fraction = 0.0;
  double build_seconds = 0.0;

  /// True when the build-determining parameters coincide (dropped mass and
  /// build time are outputs, not inputs).
  bool same_build(const TensorMeta& o) const;
};

/// Sparse gain weights, frozen to CSR-by-k after the build:
/// entries for cell k live in [row_offset[k], row_offset[k+1]) of the three
/// index-sorted parallel arrays.
struct GainTensor {
  std::vector<std::uint64_t> row_offset;
  std::vector<std::uint32_t> l;
  std::vector<std::uint32_t> lp;
  std::vector<double> w;

  std::size_t entry_count() const { return w.size(); }
};

/// Loss weights L[k][l], dense row-major (the Haar loss term collapses to a
/// matrix because test and trial factors at v share one cell).
struct LossTensor {
  std::size_t n = 0;
  std::vector<double> m;

  double at(std::size_t k, std::size_t l) const { return m[k * n + l]; }
  std::size_t nonzero_count() const;
};

struct CollisionTensors {
  TensorMeta meta;
  GainTensor gain;
  LossTensor loss;
};

struct BuildOptions {
  int threads = 1;
  bool unweighted = false;
  /// Hard cap on stored gain entries; exceeding it aborts the build.
  std::size_t gain_entry_cap = 200'000'000;
};

/// Monte-Carlo discretization of the spectral collision operator.
///
/// For every ordered pair of kept cells, `samples_per_pair` triples
/// (vb, vb*, sigma) are drawn from an RNG stream derived as
/// Rng::stream(seed, pair_index) with pair_index = k * n + k*, so the result
/// is independent of the thread count. Gain samples whose post-collision
/// cells are not both kept are dropped; their weight fraction is reported as
/// meta.dropped_mass_fraction.
CollisionTensors build(const FilteredBasis& basis, const KernelSpec& spec,
                       std::uint64_t samples_per_pair, std::uint64_t seed,
                       const BuildOptions& opts = {});

struct OracleOptions {
  // Loss integrals carry no angular dependence (the band integral of b is
  // analytic) and tolerate a finer 6-dim rule: composite loss_subdiv^3 panels
  // per cell, Gauss loss_order per axis per panel.
  int loss_order = 6;
  int loss_subdiv = 2;
  // Gain adds the angular dimension: Gauss gain_order per cell axis and an
  // equal-area covering of the angular band with n_sigma nodes, shifted in
  // both band coordinates per volume node (Cranley-Patterson) so that
  // cell-indicator aliasing decorrelates across the 6-dim grid.
  int gain_order = 6;
  int n_sigma = 160;
  int threads = 1;
  bool unweighted = false;
};

/// Deterministic quadrature version of build(): nested Gauss-Legendre over
/// both bar cells and an equal-area rule on the angular band. Test-only;
/// guarded to small instances.
///
/// When gain_second_moment is non-null it receives the dense n^3 integrals of
/// the squared per-sample weight, which bound the true variance of build()'s
/// estimator: Var(entry) <= cellvol^2 * 4pi * SQ / samples_per_pair. (The
/// sample-based variance estimate understates this badly for entries whose
/// weight concentrates in thin Jacobian spikes.)
CollisionTensors oracle_build(const FilteredBasis& basis, const KernelSpec& spec,
                              const OracleOptions& opts = {},
                              std::vector<double>* gain_second_moment = nullptr);

struct OracleEntryOptions {
  int cell_order = 5;
  int n_sigma = 3072;
  bool unweighted = false;
};

/// Single gain entry in the involuted representation: both density cells are
/// pinned integration boxes and only the produced cell k and the kept-region
/// membership of the partner remain as indicators on sigma. An independent
/// route to the same number as build()/oracle_build() via the collision
/// involution.
double oracle_gain_entry(const FilteredBasis& basis, const KernelSpec& spec, std::size_t k,
                         std::size_t l, std::size_t lp, const OracleEntryOptions& opts = {});

struct OracleRowOptions {
  int cell_order = 5;   // over the produced cell k
  int kept_order = 4;   // per cell-aligned panel of the kept box, per axis
  int n_sigma = 2048;
  bool unweighted = false;
};

/// Direct-form refinement of one produced-cell row: integrates over
/// cell k x kept region x band with a cell-aligned composite rule and a dense
/// scrambled sigma covering. Fills the n^2 arrays indexed l*n+lp with the
/// row's gain entries and their squared-weight integrals (same variance bound
/// as oracle_build's gain_second_moment). Used to re-judge entries whose
/// support is too thin for the shared first-pass rule.
void oracle_refine_row(const FilteredBasis& basis, const KernelSpec& spec, std::size_t k,
                       std::vector<double>& value, std::vector<double>& second_moment,
                       const OracleRowOptions& opts = {});

/// Little-endian cache file, format "BWT1". Header carries the build
/// parameters, entry counts and a 64-bit FNV-1a checksum of the payload;
/// payload is the index-sorted loss triples (k,l,w) then gain quadruples
/// (k,l,l',w).
void save(const CollisionTensors& tensors, const std::string& path);

/// Loads and verifies magic, version, counts and checksum. Throws IoError on
/// corruption or version mismatch.
CollisionTensors load(const std::string& path);

/// Loads like load() and additionally refuses a cache whose build parameters
/// differ from `expected` (ConfigError).
CollisionTensors load_matching(const std::string& path, const TensorMeta& expected);

}  // namespace boltzwave
