#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "skp/geometry/point_cloud.hpp"

namespace skp {

struct Neighbor {
  std::size_t index;
  double distance_sq;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    if (a.distance_sq != b.distance_sq) return a.distance_sq < b.distance_sq;
    return a.index < b.index;
  }
  friend bool operator==(const Neighbor& a, const Neighbor& b) = default;
};

/// Balanced k-d tree over a fixed point set.
///
/// Results are ordered by ascending distance with ties broken by ascending
/// index, so queries are reproducible bit for bit. The tree is immutable
/// after construction and safe for concurrent queries.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(std::span<const Vec3> points, std::size_t leaf_size = 8);

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Exactly min(k, size()) distinct neighbors.
  [[nodiscard]] std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

  /// Every point with distance <= radius.
  [[nodiscard]] std::vector<Neighbor> radius(const Vec3& query, double radius) const;

 private:
  struct Node {
    Vec3 lo;
    Vec3 hi;
    std::size_t begin = 0;
    std::size_t end = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  void knn_recurse(int node, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const;
  void radius_recurse(int node, const Vec3& q, double r2, std::vector<Neighbor>& out) const;
  static double box_distance_sq(const Node& n, const Vec3& q);

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

}  // namespace skp
