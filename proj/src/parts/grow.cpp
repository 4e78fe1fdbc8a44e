#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "skp/parts/part_graph.hpp"

namespace skp {

namespace {

// Normals this close to perpendicular count as perpendicular, so rounding
// after a rigid motion cannot flip the opposite-direction test.
constexpr double kPerpendicularTolerance = 1e-9;

// atan2 form stays accurate for nearly parallel normals, where acos of the
// dot product loses half the digits.
double normal_angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

}  // namespace

void GrowConfig::validate() const {
  if (!(angle_threshold > 0.0)) throw std::invalid_argument("grow: angle_threshold must be > 0");
  if (points_per_part < 4) throw std::invalid_argument("grow: points_per_part must be >= 4");
  if (max_parts == 0) throw std::invalid_argument("grow: max_parts must be >= 1");
  if (knn == 0) throw std::invalid_argument("grow: knn must be >= 1");
}

std::vector<std::vector<std::size_t>> point_adjacency(const PointCloud& cloud,
                                                      const SpatialIndex& index, std::size_t k) {
  std::vector<std::vector<std::size_t>> adj(cloud.size());
  if (cloud.has_faces()) {
    for (const Face& f : cloud.faces) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          if (a != b) adj[f[static_cast<std::size_t>(a)]].push_back(f[static_cast<std::size_t>(b)]);
        }
      }
    }
    for (auto& list : adj) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return adj;
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (const Neighbor& n : index.knn(cloud.positions[i], k + 1)) {
      if (n.index != i) adj[i].push_back(n.index);
    }
    if (adj[i].size() > k) adj[i].resize(k);
  }
  return adj;
}

std::vector<Part> grow_parts(const PointCloud& cloud,
                             const std::vector<std::vector<std::size_t>>& adjacency,
                             const GrowConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = cloud.size();
  std::vector<Part> parts;
  if (n == 0) return parts;
  if (adjacency.size() != n || cloud.normals.size() != n) {
    throw std::invalid_argument("grow_parts: adjacency/normals do not match the cloud");
  }

  const double threshold = cfg.effective_threshold();
  std::vector<long> owner(n, -1);
  std::vector<char> border(n, 0);
  std::size_t unassigned = n;
  std::vector<std::size_t> candidates;

  auto pick = [&rng](const std::vector<std::size_t>& from) {
    std::uniform_int_distribution<std::size_t> dist(0, from.size() - 1);
    return from[dist(rng)];
  };

  while (unassigned > 0 && parts.size() < cfg.max_parts) {
    std::size_t seed = 0;
    if (parts.empty()) {
      std::uniform_int_distribution<std::size_t> dist(0, n - 1);
      seed = dist(rng);
    } else {
      candidates.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (border[i] && owner[i] < 0) candidates.push_back(i);
      }
      if (candidates.empty()) {
        // Disconnected component: fall back to any unassigned point.
        for (std::size_t i = 0; i < n; ++i) {
          if (owner[i] < 0) candidates.push_back(i);
        }
      }
      seed = pick(candidates);
    }

    const long id = static_cast<long>(parts.size());
    Part part;
    part.seed_index = seed;
    const Vec3 seed_normal = cloud.normals[seed];
    owner[seed] = id;
    --unassigned;
    part.members.push_back(seed);

    std::deque<std::size_t> frontier{seed};
    double accumulated = 0.0;
    bool exhausted = false;
    while (!exhausted && !frontier.empty()) {
      const std::size_t f = frontier.front();
      frontier.pop_front();
      for (std::size_t q : adjacency[f]) {
        if (owner[q] >= 0) continue;
        if (cloud.normals[q].dot(seed_normal) < -kPerpendicularTolerance) continue;
        owner[q] = id;
        --unassigned;
        part.members.push_back(q);
        frontier.push_back(q);
        accumulated += normal_angle(cloud.normals[f], cloud.normals[q]);
        if (accumulated >= threshold) {
          exhausted = true;
          break;
        }
      }
    }

    for (std::size_t m : part.members) {
      for (std::size_t q : adjacency[m]) {
        if (owner[q] < 0) border[q] = 1;
      }
    }
    std::sort(part.members.begin(), part.members.end());
    parts.push_back(std::move(part));
  }
  return parts;
}

}  // namespace skp
