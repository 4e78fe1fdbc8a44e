#include <algorithm>
#include <cmath>

#include "skp/parts/part_graph.hpp"

namespace skp {

namespace {

void prune_candidates(std::size_t i, std::vector<std::size_t>& cand, const std::vector<Part>& parts,
                      const ConnectConfig& cfg,
                      std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  struct Candidate {
    std::size_t index;
    Vec3 offset;
    double dist_sq;
  };
  const Part& pi = parts[i];
  const double back_cos = std::cos(cfg.back_cone_half_angle);
  std::vector<Candidate> kept;
  for (std::size_t j : cand) {
    const Vec3 d = parts[j].center - pi.center;
    const double d2 = d.squaredNorm();
    if (d2 == 0.0) continue;
    if (d.dot(pi.normal) < -back_cos * std::sqrt(d2)) continue;
    kept.push_back({j, d, d2});
  }
  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
    return a.dist_sq != b.dist_sq ? a.dist_sq < b.dist_sq : a.index < b.index;
  });

  const double cone_cos = std::cos(cfg.cone_half_angle);
  std::vector<const Candidate*> retained;
  for (const Candidate& k : kept) {
    const double nk = std::sqrt(k.dist_sq);
    const bool hidden = std::any_of(retained.begin(), retained.end(), [&](const Candidate* j) {
      return j->offset.dot(k.offset) > cone_cos * std::sqrt(j->dist_sq) * nk;
    });
    if (!hidden) retained.push_back(&k);
  }
  for (const Candidate* j : retained) edges.emplace_back(i, j->index);
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> connect_parts(
    const std::vector<Part>& parts, const std::vector<std::vector<std::size_t>>& point_adjacency,
    std::size_t point_count, const ConnectConfig& cfg) {
  const std::size_t p = parts.size();
  std::vector<std::vector<std::size_t>> cand(p);

  if (!point_adjacency.empty()) {
    std::vector<long> owner(point_count, -1);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t m : parts[i].members) owner[m] = static_cast<long>(i);
    }
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t m : parts[i].members) {
        for (std::size_t q : point_adjacency[m]) {
          const long j = owner[q];
          if (j >= 0 && static_cast<std::size_t>(j) != i) {
            cand[i].push_back(static_cast<std::size_t>(j));
            cand[static_cast<std::size_t>(j)].push_back(i);
          }
        }
      }
    }
  }

  if (cfg.use_spatial_fallback && p > 1) {
    std::vector<Vec3> centers;
    centers.reserve(p);
    double max_r = 0.0;
    for (const Part& part : parts) {
      centers.push_back(part.center);
      max_r = std::max(max_r, part.bounding_radius);
    }
    const SpatialIndex index(centers);
    for (std::size_t i = 0; i < p; ++i) {
      for (const Neighbor& n : index.radius(centers[i], parts[i].bounding_radius + max_r)) {
        if (n.index == i) continue;
        const double reach = parts[i].bounding_radius + parts[n.index].bounding_radius;
        if (n.distance_sq <= reach * reach) cand[i].push_back(n.index);
      }
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < p; ++i) prune_candidates(i, cand[i], parts, cfg, edges);
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<std::pair<std::size_t, std::size_t>> connect_parts(const std::vector<Part>& parts,
                                                               const ConnectConfig& cfg) {
  return connect_parts(parts, {}, 0, cfg);
}

std::vector<std::vector<std::size_t>> PartGraph::neighbor_lists() const {
  std::vector<std::vector<std::size_t>> lists(parts.size());
  for (const auto& [i, j] : edges) lists[i].push_back(j);
  return lists;
}

PartGraph build_part_graph(const PointCloud& cloud, const GrowConfig& grow,
                           const ConnectConfig& connect, Rng& rng) {
  PartGraph graph;
  if (cloud.empty()) return graph;
  const SpatialIndex index(cloud.positions);
  const auto adjacency = point_adjacency(cloud, index, grow.knn);
  graph.parts = grow_parts(cloud, adjacency, grow, rng);
  for (Part& part : graph.parts) compute_part_geometry(part, cloud);
  for (Part& part : graph.parts) {
    part.canonical_points = canonicalize_part(part, cloud, grow.points_per_part, rng);
  }
  graph.edges = connect_parts(graph.parts, adjacency, cloud.size(), connect);
  return graph;
}

}  // namespace skp
