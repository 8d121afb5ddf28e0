#include "boltzwave/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "boltzwave/errors.hpp"

namespace boltzwave {

namespace {

GaussRule compute_rule(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Newton iteration from the Chebyshev-like initial guess; standard scheme,
  // accurate to machine precision for n <= 64.
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int order) {
  if (order < 1 || order > 64)
    throw ConfigError("quadrature order must be in [1, 64], got " + std::to_string(order));
  static std::map<int, GaussRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute_rule(order)).first;
  return it->second;
}

double integrate_1d(int order, double a, double b, const std::function<double(double)>& f) {
  const GaussRule& rule = gauss_legendre(order);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < order; ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

double integrate_box(int order, const Box3& box, const std::function<double(const Vec3&)>& f) {
  const GaussRule& rule = gauss_legendre(order);
  std::array<double, 3> mid{}, half{};
  for (int d = 0; d < 3; ++d) {
    mid[d] = 0.5 * (box.lo[d] + box.hi[d]);
    half[d] = 0.5 * (box.hi[d] - box.lo[d]);
  }
  double sum = 0.0;
  for (int i = 0; i < order; ++i) {
    const double xi = mid[0] + half[0] * rule.nodes[i];
    for (int j = 0; j < order; ++j) {
      const double yj = mid[1] + half[1] * rule.nodes[j];
      const double wij = rule.weights[i] * rule.weights[j];
      for (int k = 0; k < order; ++k) {
        const double zk = mid[2] + half[2] * rule.nodes[k];
        sum += wij * rule.weights[k] * f({xi, yj, zk});
      }
    }
  }
  return sum * half[0] * half[1] * half[2];
}

}  // namespace boltzwave
