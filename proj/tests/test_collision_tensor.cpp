#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "boltzwave/collision_tensor.hpp"
#include "boltzwave/errors.hpp"

using namespace boltzwave;
namespace fs = std::filesystem;

namespace {

bool tensors_equal(const CollisionTensors& a, const CollisionTensors& b) {
  return a.loss.m == b.loss.m && a.gain.row_offset == b.gain.row_offset && a.gain.l == b.gain.l &&
         a.gain.lp == b.gain.lp && a.gain.w == b.gain.w;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (fs::temp_directory_path() / name).string();
  }
  ~TempFile() { std::error_code ec; fs::remove(path, ec); }
};

}  // namespace

TEST_CASE("small build: loss positivity and determinism") {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  BuildOptions opts;
  opts.threads = 2;
  const CollisionTensors a = build(basis, spec, 200, 12345, opts);
  opts.threads = 1;
  const CollisionTensors b = build(basis, spec, 200, 12345, opts);
  CHECK(tensors_equal(a, b));

  const std::size_t n = basis.size();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) CHECK(a.loss.at(k, l) > 0.0);
  CHECK(a.gain.entry_count() > 0);
  for (double w : a.gain.w) CHECK(w >= 0.0);
  CHECK(a.meta.dropped_mass_fraction > 0.0);
  CHECK(a.meta.dropped_mass_fraction < 1.0);

  const CollisionTensors c = build(basis, spec, 200, 777, opts);
  CHECK(!tensors_equal(a, c));
}

TEST_CASE("energy-forbidden gain entries are absent") {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  const CollisionTensors t = build(basis, spec, 500, 9, BuildOptions{});

  const std::size_t n = basis.size();
  std::vector<double> emin(n), emax(n);
  for (std::size_t i = 0; i < n; ++i) {
    const CellGeometry g = basis.bar_cell(i);
    Vec3 near{}, far{};
    for (int d = 0; d < 3; ++d) {
      const double lo = g.bar_lo[d], hi = g.bar_hi[d];
      near[d] = (lo <= 0.0 && 0.0 <= hi) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
      far[d] = std::max(std::abs(lo), std::abs(hi));
    }
    emin[i] = norm2_sq(phi_inv(BarVelocity{near}).c);
    emax[i] = norm2_sq(phi_inv(BarVelocity{far}).c);
  }
  double source_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) source_max = std::max(source_max, emax[i]);

  for (std::size_t k = 0; k < n; ++k)
    for (std::uint64_t i = t.gain.row_offset[k]; i < t.gain.row_offset[k + 1]; ++i) {
      // Elastic conservation: products cannot jointly exceed the available energy.
      CHECK(emin[t.gain.l[i]] + emin[t.gain.lp[i]] <= emax[k] + source_max + 1e-12);
    }
}

TEST_CASE("lambda larger than the kept diameter changes nothing") {
  FilteredBasis basis(2, 0.75);
  KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  const CollisionTensors plain = build(basis, spec, 100, 4, BuildOptions{});
  // Kept |v|_inf <= 3, so relative speeds stay below 2*sqrt(3)*3 < 11.
  spec.lambda = 1e4;
  const CollisionTensors trunc = build(basis, spec, 100, 4, BuildOptions{});
  CHECK(tensors_equal(plain, trunc));
}

TEST_CASE("b0 = 0 gives empty tensors") {
  FilteredBasis basis(2, 0.75);
  KernelSpec spec;
  spec.gamma = 0.5;
  spec.theta_b = M_PI / 6.0;
  spec.b0 = 0.0;
  const CollisionTensors t = build(basis, spec, 50, 1, BuildOptions{});
  CHECK(t.gain.entry_count() == 0);
  CHECK(t.loss.nonzero_count() == 0);
}

TEST_CASE("dropped mass decreases as delta grows at fixed N") {
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  BuildOptions opts;
  opts.threads = 2;
  const CollisionTensors narrow = build(FilteredBasis(3, 0.5), spec, 20, 5, opts);
  const CollisionTensors wide = build(FilteredBasis(3, 0.9), spec, 20, 5, opts);
  CHECK(wide.meta.dropped_mass_fraction < narrow.meta.dropped_mass_fraction);
}

TEST_CASE("cache roundtrip is exact") {
  FilteredBasis basis(2, 0.75);
  KernelSpec spec = KernelSpec::normalized(0.6, 0.5);
  spec.lambda = 7.5;
  const CollisionTensors t = build(basis, spec, 150, 42, BuildOptions{});
  TempFile file("bw_roundtrip.bwt");
  save(t, file.path);
  const CollisionTensors back = load(file.path);
  CHECK(tensors_equal(t, back));
  CHECK(back.meta.same_build(t.meta));
  CHECK(back.meta.dropped_mass_fraction == t.meta.dropped_mass_fraction);
  REQUIRE(back.meta.kernel.lambda.has_value());
  CHECK(*back.meta.kernel.lambda == 7.5);

  // Saving the loaded tensors reproduces the file byte for byte.
  TempFile file2("bw_roundtrip2.bwt");
  save(back, file2.path);
  std::ifstream f1(file.path, std::ios::binary), f2(file2.path, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
}

TEST_CASE("corrupt and mismatched caches are refused") {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  const CollisionTensors t = build(basis, spec, 60, 8, BuildOptions{});
  TempFile file("bw_corrupt.bwt");
  save(t, file.path);

  SUBCASE("truncated file") {
    const auto size = fs::file_size(file.path);
    fs::resize_file(file.path, size / 2);
    CHECK_THROWS_AS(load(file.path), IoError);
  }
  SUBCASE("flipped payload byte") {
    std::fstream f(file.path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    char c;
    f.seekg(200);
    f.get(c);
    f.seekp(200);
    f.put(static_cast<char>(c ^ 0x40));
    f.close();
    CHECK_THROWS_AS(load(file.path), IoError);
  }
  SUBCASE("bad magic") {
    std::fstream f(file.path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
    f.close();
    CHECK_THROWS_AS(load(file.path), IoError);
  }
  SUBCASE("parameter mismatch") {
    TensorMeta want = t.meta;
    want.level = 3;
    CHECK_THROWS_AS(load_matching(file.path, want), ConfigError);
    want = t.meta;
    want.seed = 999;
    CHECK_THROWS_AS(load_matching(file.path, want), ConfigError);
    CHECK_NOTHROW(load_matching(file.path, t.meta));
  }
}

TEST_CASE("gain entry cap aborts the build") {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  BuildOptions opts;
  opts.gain_entry_cap = 10;
  CHECK_THROWS_AS(build(basis, spec, 100, 3, opts), ConfigError);
}

TEST_CASE("oracle guard") {
  FilteredBasis big(4, 0.9);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  CHECK_THROWS_AS(oracle_build(big, spec, OracleOptions{}), ConfigError);
}

TEST_CASE("oracle: empty kernel and lambda beyond diameter") {
  FilteredBasis basis(2, 0.75);
  OracleOptions fast;
  fast.loss_order = 2;
  fast.loss_subdiv = 1;
  fast.gain_order = 2;
  fast.n_sigma = 8;
  KernelSpec zero;
  zero.gamma = 0.5;
  zero.theta_b = M_PI / 6.0;
  zero.b0 = 0.0;
  const CollisionTensors empty = oracle_build(basis, zero, fast);
  CHECK(empty.gain.entry_count() == 0);
  CHECK(empty.loss.nonzero_count() == 0);

  const KernelSpec plain = KernelSpec::normalized(0.5, M_PI / 6.0);
  KernelSpec trunc = plain;
  trunc.lambda = 1e4;
  CHECK(tensors_equal(oracle_build(basis, plain, fast), oracle_build(basis, trunc, fast)));
}
