#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "skp/geometry/point_cloud.hpp"

namespace skp {

using Rng = std::mt19937_64;

/// Greedy farthest point sampling.
///
/// The first index is `seed_index`; each later index maximizes the squared
/// distance to the already selected set, lowest index first on ties.
/// Already selected indices are never repeated, so m == points.size()
/// yields a permutation even when positions coincide.
std::vector<std::size_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t m,
                                                 std::size_t seed_index);

/// Samples `count` points uniformly by area over the triangle faces of
/// `mesh`. Each sample carries the normal of the face it came from.
PointCloud sample_surface(const PointCloud& mesh, std::size_t count, Rng& rng);

/// Derives an independent generator from a base seed and stream tags.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

}  // namespace skp
