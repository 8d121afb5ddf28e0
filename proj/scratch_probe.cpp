// scratch: converge MC on suspect entries to identify who is right (not shipped)
#include <cstdio>
#include <cmath>

#include "boltzwave/collision_tensor.hpp"

using namespace boltzwave;

int main() {
  FilteredBasis basis(2, 0.75);
  const KernelSpec spec = KernelSpec::normalized(0.5, M_PI / 6.0);
  const std::size_t n = basis.size();

  struct Probe {
    std::size_t k, l, lp;
  };
  const Probe probes[] = {{0, 17, 2}, {0, 19, 22}, {1, 14, 14}, {0, 8, 20}};

  auto entry_of = [&](const CollisionTensors& t, std::size_t k, std::size_t l,
                      std::size_t lp) -> double {
    for (std::uint64_t i = t.gain.row_offset[k]; i < t.gain.row_offset[k + 1]; ++i)
      if (t.gain.l[i] == l && t.gain.lp[i] == lp) return t.gain.w[i];
    return 0.0;
  };

  BuildOptions opts;
  opts.threads = 2;
  for (std::uint64_t m : {100000ULL, 400000ULL, 1600000ULL}) {
    std::printf("M=%llu:", static_cast<unsigned long long>(m));
    for (int rep = 0; rep < 2; ++rep) {
      const CollisionTensors t = build(basis, spec, m, 40404 + rep * 131, opts);
      for (const Probe& p : probes)
        std::printf("  (%zu,%zu,%zu)=%.5g", p.k, p.l, p.lp, entry_of(t, p.k, p.l, p.lp));
      std::printf("   |");
    }
    std::printf("\n");
  }

  std::printf("refined oracle:");
  for (const Probe& p : probes) {
    OracleEntryOptions eo;
    const double v = oracle_gain_entry(basis, spec, p.k, p.l, p.lp, eo);
    std::printf("  (%zu,%zu,%zu)=%.5g", p.k, p.l, p.lp, v);
  }
  std::printf("\n");
  return 0;
}
