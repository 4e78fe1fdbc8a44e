#include "skp/geometry/spatial_index.hpp"

#include <algorithm>

namespace skp {

SpatialIndex::SpatialIndex(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, points_.size());
  }
}

int SpatialIndex::build(std::size_t begin, std::size_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = points_[order_[begin]];
  node.hi = node.lo;
  for (std::size_t i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_[order_[i]]);
    node.hi = node.hi.cwiseMax(points_[order_[i]]);
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= leaf_size_) return id;

  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa != pb ? pa < pb : a < b;
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

double SpatialIndex::box_distance_sq(const Node& n, const Vec3& q) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    double d = 0.0;
    if (q[a] < n.lo[a]) d = n.lo[a] - q[a];
    else if (q[a] > n.hi[a]) d = q[a] - n.hi[a];
    d2 += d * d;
  }
  return d2;
}

void SpatialIndex::knn_recurse(int id, const Vec3& q, std::size_t k,
                               std::vector<Neighbor>& heap) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  // Equal box distance must still be explored: a tied point with a lower
  // index can displace the current worst entry.
  if (heap.size() == k && box_distance_sq(n, q) > heap.front().distance_sq) return;
  if (n.left < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      const Neighbor cand{idx, (points_[idx] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double dl = box_distance_sq(nodes_[static_cast<std::size_t>(n.left)], q);
  const double dr = box_distance_sq(nodes_[static_cast<std::size_t>(n.right)], q);
  if (dl <= dr) {
    knn_recurse(n.left, q, k, heap);
    knn_recurse(n.right, q, k, heap);
  } else {
    knn_recurse(n.right, q, k, heap);
    knn_recurse(n.left, q, k, heap);
  }
}

std::vector<Neighbor> SpatialIndex::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> heap;
  k = std::min(k, points_.size());
  if (k == 0) return heap;
  heap.reserve(k);
  knn_recurse(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

void SpatialIndex::radius_recurse(int id, const Vec3& q, double r2,
                                  std::vector<Neighbor>& out) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (box_distance_sq(n, q) > r2) return;
  if (n.left < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = (points_[idx] - q).squaredNorm();
      if (d2 <= r2) out.push_back({idx, d2});
    }
    return;
  }
  radius_recurse(n.left, q, r2, out);
  radius_recurse(n.right, q, r2, out);
}

std::vector<Neighbor> SpatialIndex::radius(const Vec3& query, double r) const {
  std::vector<Neighbor> out;
  if (points_.empty() || r < 0.0) return out;
  radius_recurse(0, query, r * r, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace skp
