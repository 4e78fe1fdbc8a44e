#pragma once

// Brute-force references shared by the unit tests and the acceptance run.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "skp/conv/kernel_conv.hpp"
#include "skp/parts/part_graph.hpp"

namespace oracle {

using skp::ConnectConfig;
using skp::Part;
using skp::Vec3;
using skp::conv::GraphNeighborhood;
using skp::conv::KernelLayout;
using skp::nn::Index;
using skp::nn::Matrix;

/// Farthest point sampling by re-scanning every selected point each round.
inline std::vector<std::size_t> fps(const std::vector<Vec3>& pts, std::size_t m, std::size_t seed) {
  std::vector<std::size_t> sel{seed};
  while (sel.size() < m) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t s : sel) dmin = std::min(dmin, (pts[i] - pts[s]).squaredNorm());
      if (dmin > best) {
        best = dmin;
        arg = i;
      }
    }
    sel.push_back(arg);
  }
  return sel;
}

// Direct transcription of the three connectivity rules, quadratic per part.
inline std::set<std::pair<std::size_t, std::size_t>> connect(const std::vector<Part>& parts,
                                                            const std::vector<std::vector<std::size_t>>& adj,
                                                            const ConnectConfig& cfg) {
  const std::size_t n = parts.size();
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> cand;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      bool surface = false;
      for (std::size_t a : parts[i].members) {
        for (std::size_t b : parts[j].members) {
          const auto& la = adj[a];
          const auto& lb = adj[b];
          if (std::find(la.begin(), la.end(), b) != la.end() || std::find(lb.begin(), lb.end(), a) != lb.end()) {
            surface = true;
          }
        }
      }
      const Vec3 d = parts[j].center - parts[i].center;
      const bool overlap = cfg.use_spatial_fallback && d.norm() <= parts[i].bounding_radius + parts[j].bounding_radius;
      if (!surface && !overlap) continue;
      if (d.norm() == 0.0) continue;
      const double to_back = testutil::angle_between(d, -parts[i].normal);
      if (to_back < cfg.back_cone_half_angle) continue;
      cand.push_back(j);
    }
    auto closer = [&](std::size_t a, std::size_t b) {
      const double da = (parts[a].center - parts[i].center).squaredNorm();
      const double db = (parts[b].center - parts[i].center).squaredNorm();
      return da < db || (da == db && a < b);
    };
    std::map<std::size_t, bool> memo;
    std::function<bool(std::size_t)> retained = [&](std::size_t k) -> bool {
      if (auto it = memo.find(k); it != memo.end()) return it->second;
      bool keep = true;
      for (std::size_t j : cand) {
        if (j == k || !closer(j, k)) continue;
        const double a = testutil::angle_between(parts[j].center - parts[i].center, parts[k].center - parts[i].center);
        if (a < cfg.cone_half_angle && retained(j)) keep = false;
      }
      return memo[k] = keep;
    };
    for (std::size_t k : cand) {
      if (retained(k)) edges.emplace(i, k);
    }
  }
  return edges;
}

// out_i = sum_j sum_k h_k(d_ij) f_j W_k, written out one scalar at a time.
inline Matrix naive_conv(const Matrix& f, const GraphNeighborhood& g, const KernelLayout& layout, const Matrix& w,
                  bool spherical) {
  const Index fin = f.cols(), fout = w.cols();
  const auto k_count = static_cast<Index>(layout.size());
  Matrix out = Matrix::Zero(f.rows(), fout);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j : g.neighbors[i]) {
      Vec3 d = g.rotations[i] * (g.centers[j] - g.centers[i]);
      if (spherical) d = d.norm() < 1e-9 ? Vec3::Zero() : Vec3(d / d.norm());
      for (Index k = 0; k < k_count; ++k) {
        const double dist = (d - layout.centers[static_cast<std::size_t>(k)]).norm();
        const double h = std::max(0.0, 1.0 - dist / layout.sigma);
        for (Index o = 0; o < fout; ++o) {
          for (Index c = 0; c < fin; ++c) {
            out(static_cast<Index>(i), o) += h * f(static_cast<Index>(j), c) * w(k * fin + c, o);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
