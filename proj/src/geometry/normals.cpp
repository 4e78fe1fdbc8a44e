#include "skp/geometry/normals.hpp"

#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace skp {

namespace {

// Rank < 2 when the middle eigenvalue vanishes relative to the largest.
constexpr double kRankTolerance = 1e-12;

}  // namespace

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k) {
  const SpatialIndex index(cloud.positions);
  return estimate_normals(cloud, index, k);
}

NormalEstimate estimate_normals(const PointCloud& cloud, const SpatialIndex& index,
                                std::size_t k) {
  if (k < 3 || cloud.size() < k) {
    throw std::invalid_argument("estimate_normals: requires size() >= k >= 3");
  }
  NormalEstimate out;
  out.cloud = cloud;
  out.cloud.normals.assign(cloud.size(), Vec3::UnitZ());
  const Vec3 center = centroid(cloud.positions);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(cloud.positions[i], k);
    Vec3 mean = Vec3::Zero();
    for (const Neighbor& n : nbrs) mean += cloud.positions[n.index];
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (const Neighbor& n : nbrs) {
      const Vec3 d = cloud.positions[n.index] - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
    const Vec3 evals = solver.eigenvalues();
    if (evals[2] <= 0.0 || evals[1] <= kRankTolerance * evals[2]) {
      out.degenerate.push_back(i);
      continue;
    }
    Vec3 normal = solver.eigenvectors().col(0).normalized();
    if (normal.dot(cloud.positions[i] - center) < 0.0) normal = -normal;
    out.cloud.normals[i] = normal;
  }
  return out;
}

Vec3 triangle_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

std::vector<Vec3> face_vertex_normals(const PointCloud& mesh) {
  std::vector<Vec3> normals(mesh.size(), Vec3::Zero());
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.positions[f[0]];
    const Vec3& b = mesh.positions[f[1]];
    const Vec3& c = mesh.positions[f[2]];
    // Unnormalized cross product weights by twice the area.
    const Vec3 n = (b - a).cross(c - a);
    for (std::uint32_t v : f) normals[v] += n;
  }
  for (Vec3& n : normals) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
  return normals;
}

}  // namespace skp
