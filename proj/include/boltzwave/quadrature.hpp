#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "boltzwave/vec3.hpp"

namespace boltzwave {

/// Gauss-Legendre rule on [-1,1]. Nodes/weights computed once per order by
/// Newton iteration and cached process-wide.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// order in [1, 64]; throws ConfigError otherwise.
const GaussRule& gauss_legendre(int order);

/// Integrate f over the 1-D interval [a, b].
double integrate_1d(int order, double a, double b, const std::function<double(double)>& f);

/// Axis-aligned box in 3-D.
struct Box3 {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};

  double volume() const {
    return (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
  }
};

/// Tensor-product Gauss-Legendre over a box, `order` points per axis.
double integrate_box(int order, const Box3& box, const std::function<double(const Vec3&)>& f);

}  // namespace boltzwave
