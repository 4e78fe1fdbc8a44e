#include "skp/geometry/point_cloud.hpp"

#include <cmath>


namespace skp {

void PointCloud::validate() const {
  if (normals.size() != positions.size()) {
    throw std::invalid_argument("point cloud: normals.size() != positions.size()");
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (std::abs(normals[i].norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("point cloud: normal " + std::to_string(i) +
                                  " is not unit length");
    }
  }
  for (const Face& f : faces) {
    for (std::uint32_t v : f) {
      if (v >= positions.size()) {
        throw std::invalid_argument("point cloud: face index out of range");
      }
    }
  }
}

void PointCloud::normalize_normals() {
  for (Vec3& n : normals) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
}

Vec3 centroid(const std::vector<Vec3>& points) {
  Vec3 c = Vec3::Zero();
  if (points.empty()) return c;
  for (const Vec3& p : points) c += p;
  return c / static_cast<double>(points.size());
}

double bounding_radius(const std::vector<Vec3>& points) {
  const Vec3 c = centroid(points);
  double r = 0.0;
  for (const Vec3& p : points) r = std::max(r, (p - c).norm());
  return r;
}

Mat3 rotation_about_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

PointCloud transform(const PointCloud& cloud, const Mat3& rotation, double scale) {
  PointCloud out = cloud;
  for (Vec3& p : out.positions) p = scale * (rotation * p);
  for (Vec3& n : out.normals) n = rotation * n;
  return out;
}

}  // namespace skp
