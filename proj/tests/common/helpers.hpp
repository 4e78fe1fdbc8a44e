#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "skp/geometry/point_cloud.hpp"
#include "skp/geometry/sampling.hpp"

namespace testutil {

inline std::vector<skp::Vec3> random_points(std::size_t n, std::uint64_t seed, double extent = 1.0) {
  skp::Rng rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<skp::Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

inline skp::Vec3 random_unit(skp::Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  skp::Vec3 v(g(rng), g(rng), g(rng));
  return v.normalized();
}

/// Points on the unit sphere with radial normals.
inline skp::PointCloud sphere_cloud(std::size_t n, std::uint64_t seed) {
  skp::Rng rng(seed);
  skp::PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const skp::Vec3 p = random_unit(rng);
    c.positions.push_back(p);
    c.normals.push_back(p);
  }
  return c;
}

/// Regular grid on z = `z` with normals `n`.
inline skp::PointCloud plane_grid(int side, double z, const skp::Vec3& n, double spacing = 0.1) {
  skp::PointCloud c;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      c.positions.emplace_back(i * spacing, j * spacing, z);
      c.normals.push_back(n);
    }
  }
  return c;
}

inline double angle_between(const skp::Vec3& a, const skp::Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace testutil
