#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<std::uint32_t, 3>;

/// Positions with unit normals and optional triangle faces.
///
/// Units are never interpreted; every downstream stage is expected to be
/// invariant to a global rescale of `positions`.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Face> faces;

  [[nodiscard]] std::size_t size() const { return positions.size(); }
  [[nodiscard]] bool empty() const { return positions.empty(); }
  [[nodiscard]] bool has_faces() const { return !faces.empty(); }
  [[nodiscard]] bool has_normals() const {
    return !positions.empty() && normals.size() == positions.size();
  }

  /// Throws std::invalid_argument if the normal/face invariants are broken.
  void validate() const;

  /// Renormalizes every normal in place; zero normals are left untouched.
  void normalize_normals();
};

/// The fixed global frame. `z` is the gravity-aligned vertical axis.
struct GlobalFrame {
  Vec3 x{1.0, 0.0, 0.0};
  Vec3 y{0.0, 1.0, 0.0};
  Vec3 z{0.0, 0.0, 1.0};
};

/// Mean of the positions. Returns zero for an empty cloud.
Vec3 centroid(const std::vector<Vec3>& points);

/// Maximum distance from the centroid to any position.
double bounding_radius(const std::vector<Vec3>& points);

/// Rotation by `angle` radians about the vertical axis.
Mat3 rotation_about_z(double angle);

/// Applies `rotation` then `scale` to positions and `rotation` to normals.
PointCloud transform(const PointCloud& cloud, const Mat3& rotation, double scale = 1.0);

}  // namespace skp
