#pragma once

#include <cstddef>
#include <vector>

#include "skp/geometry/point_cloud.hpp"
#include "skp/geometry/spatial_index.hpp"

namespace skp {

struct NormalEstimate {
  PointCloud cloud;
  /// Points whose neighborhood covariance had rank < 2. Their normal is +z.
  std::vector<std::size_t> degenerate;
};

/// PCA normals from the k nearest neighbors (the point itself included).
///
/// Each normal is the least-eigenvalue eigenvector of the neighborhood
/// covariance, flipped to point away from the cloud centroid.
/// Requires size() >= k >= 3.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t k);
NormalEstimate estimate_normals(const PointCloud& cloud, const SpatialIndex& index,
                                std::size_t k);

/// Area-weighted vertex normals from the triangle faces. Vertices that touch
/// no face (or only zero-area faces) get a zero normal.
std::vector<Vec3> face_vertex_normals(const PointCloud& mesh);

/// Unit normal of a triangle (right-hand winding). Zero for degenerate faces.
Vec3 triangle_normal(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace skp
