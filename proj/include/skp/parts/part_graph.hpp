#pragma once

#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "skp/geometry/point_cloud.hpp"
#include "skp/geometry/sampling.hpp"
#include "skp/geometry/spatial_index.hpp"

namespace skp {

struct GrowConfig {
  /// Curvature budget in radians: summed normal angles that end a part.
  double angle_threshold = 2.0;
  std::size_t max_parts = 128;
  std::size_t points_per_part = 128;
  /// Neighbors per point when the cloud has no faces.
  std::size_t knn = 10;
  double real_data_multiplier = 3.0;
  bool real_data = false;

  [[nodiscard]] double effective_threshold() const {
    return real_data ? angle_threshold * real_data_multiplier : angle_threshold;
  }
  void validate() const;
};

struct ConnectConfig {
  /// Also connect parts whose bounding spheres intersect.
  bool use_spatial_fallback = true;
  /// Aperture of the occlusion cone cast by a closer neighbor.
  double cone_half_angle = 20.0 * std::numbers::pi / 180.0;
  /// Neighbors within this angle of the reversed part normal are ignored.
  double back_cone_half_angle = 45.0 * std::numbers::pi / 180.0;
};

/// A grown surface patch together with its local frame.
struct Part {
  std::vector<std::size_t> members;  // sorted ascending
  std::size_t seed_index = 0;
  Vec3 center = Vec3::Zero();
  double bounding_radius = 0.0;
  /// Part normal (least principal axis, oriented like the member normals).
  Vec3 normal = Vec3::UnitZ();
  /// Rows v1, v2, v3 of the local reference frame.
  Mat3 lrf = Mat3::Identity();
  bool degenerate_lrf = false;
  std::vector<Vec3> canonical_points;
};

struct PartGraph {
  std::vector<Part> parts;
  /// Sorted, unique (i, j): j is a retained neighbor of i.
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  /// Outgoing neighbor lists in edge order.
  [[nodiscard]] std::vector<std::vector<std::size_t>> neighbor_lists() const;
};

/// Per-point surface neighborhoods: the mesh 1-ring when faces exist,
/// otherwise the k nearest neighbors (self excluded, ascending distance).
std::vector<std::vector<std::size_t>> point_adjacency(const PointCloud& cloud,
                                                      const SpatialIndex& index, std::size_t k);

/// Curvature-bounded region growing. Returns parts with `members` and
/// `seed_index` filled; geometry is left to `compute_part_geometry`.
std::vector<Part> grow_parts(const PointCloud& cloud,
                             const std::vector<std::vector<std::size_t>>& adjacency,
                             const GrowConfig& cfg, Rng& rng);

struct LocalFrame {
  Mat3 rotation = Mat3::Identity();
  bool degenerate = false;
};

/// Frame with v3 = up.z, v1 = horizontal component of the part normal and
/// v2 = v3 x v1. Identity plus the degenerate flag when the normal is
/// (numerically) vertical.
LocalFrame lrf_from_normal(const Vec3& part_normal, const GlobalFrame& up = {});

/// Least principal axis of the members, sign-matched to their mean normal.
/// Falls back to the mean normal for fewer than three members or a
/// rank-deficient covariance.
Vec3 part_normal(const std::vector<std::size_t>& members, const PointCloud& cloud);

/// Fills center, bounding_radius, normal, lrf and degenerate_lrf.
void compute_part_geometry(Part& part, const PointCloud& cloud, const GlobalFrame& up = {});

LocalFrame compute_lrf(const Part& part, const PointCloud& cloud, const GlobalFrame& up = {});

/// Samples n members, centers them, rotates into the part frame and scales
/// the set into the unit ball.
std::vector<Vec3> canonicalize_part(const Part& part, const PointCloud& cloud, std::size_t n,
                                    Rng& rng);

/// Edge set from surface adjacency plus (optionally) bounding-sphere overlap,
/// after the back-cone and occlusion-cone pruning rules.
std::vector<std::pair<std::size_t, std::size_t>> connect_parts(
    const std::vector<Part>& parts, const std::vector<std::vector<std::size_t>>& point_adjacency,
    std::size_t point_count, const ConnectConfig& cfg);

/// Convenience overload without surface adjacency (spatial candidates only).
std::vector<std::pair<std::size_t, std::size_t>> connect_parts(const std::vector<Part>& parts,
                                                               const ConnectConfig& cfg);

/// Full construction: adjacency, growing, frames, canonical points, edges.
PartGraph build_part_graph(const PointCloud& cloud, const GrowConfig& grow,
                           const ConnectConfig& connect, Rng& rng);

}  // namespace skp
