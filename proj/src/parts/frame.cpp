#include <algorithm>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "skp/parts/part_graph.hpp"

namespace skp {

namespace {

constexpr double kVerticalTolerance = 1e-6;
constexpr double kRankTolerance = 1e-12;

Vec3 mean_normal(const std::vector<std::size_t>& members, const PointCloud& cloud) {
  Vec3 m = Vec3::Zero();
  for (std::size_t i : members) m += cloud.normals[i];
  return m;
}

}  // namespace

LocalFrame lrf_from_normal(const Vec3& part_normal, const GlobalFrame& up) {
  const Vec3& z = up.z;
  const Vec3 horizontal = part_normal - part_normal.dot(z) * z;
  const double len = horizontal.norm();
  LocalFrame frame;
  if (len < kVerticalTolerance) {
    frame.degenerate = true;
    return frame;
  }
  const Vec3 v1 = horizontal / len;
  const Vec3 v2 = z.cross(v1);
  frame.rotation.row(0) = v1.transpose();
  frame.rotation.row(1) = v2.transpose();
  frame.rotation.row(2) = z.transpose();
  return frame;
}

Vec3 part_normal(const std::vector<std::size_t>& members, const PointCloud& cloud) {
  if (members.empty()) throw std::invalid_argument("part_normal: empty part");
  const Vec3 avg = mean_normal(members, cloud);
  const Vec3 fallback = avg.norm() > 0.0 ? Vec3(avg.normalized()) : Vec3(Vec3::UnitZ());
  if (members.size() < 3) return fallback;

  Vec3 mean = Vec3::Zero();
  for (std::size_t i : members) mean += cloud.positions[i];
  mean /= static_cast<double>(members.size());
  Mat3 cov = Mat3::Zero();
  for (std::size_t i : members) {
    const Vec3 d = cloud.positions[i] - mean;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 evals = solver.eigenvalues();
  if (evals[2] <= 0.0 || evals[1] <= kRankTolerance * evals[2]) return fallback;
  Vec3 e3 = solver.eigenvectors().col(0).normalized();
  if (e3.dot(avg) < 0.0) e3 = -e3;
  return e3;
}

LocalFrame compute_lrf(const Part& part, const PointCloud& cloud, const GlobalFrame& up) {
  return lrf_from_normal(part_normal(part.members, cloud), up);
}

void compute_part_geometry(Part& part, const PointCloud& cloud, const GlobalFrame& up) {
  if (part.members.empty()) throw std::invalid_argument("compute_part_geometry: empty part");
  Vec3 c = Vec3::Zero();
  for (std::size_t i : part.members) c += cloud.positions[i];
  c /= static_cast<double>(part.members.size());
  double r = 0.0;
  for (std::size_t i : part.members) r = std::max(r, (cloud.positions[i] - c).norm());
  part.center = c;
  part.bounding_radius = r;
  part.normal = part_normal(part.members, cloud);
  const LocalFrame frame = lrf_from_normal(part.normal, up);
  part.lrf = frame.rotation;
  part.degenerate_lrf = frame.degenerate;
}

std::vector<Vec3> canonicalize_part(const Part& part, const PointCloud& cloud, std::size_t n,
                                    Rng& rng) {
  if (part.members.empty()) throw std::invalid_argument("canonicalize_part: empty part");
  std::vector<std::size_t> picked;
  picked.reserve(n);
  const std::size_t m = part.members.size();
  if (m < n) {
    std::uniform_int_distribution<std::size_t> dist(0, m - 1);
    for (std::size_t s = 0; s < n; ++s) picked.push_back(part.members[dist(rng)]);
  } else {
    std::vector<std::size_t> pool = part.members;
    for (std::size_t s = 0; s < n; ++s) {
      std::uniform_int_distribution<std::size_t> dist(s, m - 1);
      std::swap(pool[s], pool[dist(rng)]);
      picked.push_back(pool[s]);
    }
  }

  std::vector<Vec3> out;
  out.reserve(n);
  double max_norm = 0.0;
  for (std::size_t i : picked) {
    out.push_back(part.lrf * (cloud.positions[i] - part.center));
    max_norm = std::max(max_norm, out.back().norm());
  }
  if (max_norm > 0.0) {
    for (Vec3& p : out) p /= max_norm;
  } else {
    for (Vec3& p : out) p.setZero();
  }
  return out;
}

}  // namespace skp
