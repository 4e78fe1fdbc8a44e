#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "skp/geometry/point_cloud.hpp"
#include "skp/nn/layers.hpp"
#include "skp/parts/part_graph.hpp"

namespace skp::conv {

/// Fixed kernel points around each node plus the influence bandwidth.
struct KernelLayout {
  std::vector<Vec3> centers;
  double sigma = 0.7;
  bool has_origin = false;

  [[nodiscard]] std::size_t size() const { return centers.size(); }
};

/// `sphere_count` unit vectors in spherical-Fibonacci order (offset
/// lattice), followed by the origin when `with_origin` is set.
/// Requires sphere_count >= 2 and sigma > 0.
KernelLayout make_kernel_layout(std::size_t sphere_count, double sigma, bool with_origin);

/// Linear correlation h(p) = max(0, 1 - |p - c| / sigma).
double influence(const Vec3& p, const Vec3& c, double sigma);

enum class ConvKind { kpconv, skpconv };

ConvKind parse_conv_kind(const std::string& name);
std::string to_string(ConvKind kind);

/// Node positions, per-node neighbor lists and per-node frames.
struct GraphNeighborhood {
  std::vector<Vec3> centers;
  std::vector<std::vector<std::size_t>> neighbors;
  std::vector<Mat3> rotations;

  [[nodiscard]] std::size_t size() const { return centers.size(); }
  void validate() const;
};

/// Neighborhood mirroring the graph edges. With `use_lrf` false every frame
/// is the identity.
GraphNeighborhood make_neighborhood(const PartGraph& graph, bool use_lrf = true);

/// Disjoint union; node indices of later graphs are offset.
GraphNeighborhood concatenate(const std::vector<const GraphNeighborhood*>& parts);

/// The offset a kernel sees for neighbor j of node i: R_i (p_j - p_i),
/// projected onto the unit sphere for the spherical variant. Offsets
/// shorter than 1e-9 project to the zero vector.
Vec3 kernel_offset(const GraphNeighborhood& nbhd, std::size_t i, std::size_t j, ConvKind kind);

/// Influence of one offset on every kernel.
std::vector<double> kernel_influences(const Vec3& offset, const KernelLayout& layout);

/// Sparse [N*K, N] matrix with entry (i*K + k, j) = h_k(offset_ij). With
/// `include_self` every node also sees itself at a zero offset.
nn::SparseMatrix influence_matrix(const GraphNeighborhood& nbhd, const KernelLayout& layout,
                                  ConvKind kind, bool include_self = false);

/// out_i = sum_j sum_k H(iK+k, j) f_j W_k with W stored as [K*Fin, Fout].
nn::Tensor kernel_conv(const nn::Tensor& feats, const nn::SparseMatrix& h, const nn::Tensor& w,
                       nn::Index kernel_count);

/// Kernel point convolution over graph neighbors; `w` is [K*Fin, Fout].
nn::Tensor kpconv_forward(const nn::Tensor& feats, const GraphNeighborhood& nbhd,
                          const KernelLayout& layout, const nn::Tensor& w);

/// Same as kpconv_forward with every offset projected onto the unit sphere.
nn::Tensor skpconv_forward(const nn::Tensor& feats, const GraphNeighborhood& nbhd,
                           const KernelLayout& layout, const nn::Tensor& w);

/// Convolution followed by batch norm and ReLU.
class KernelConvLayer {
 public:
  KernelConvLayer() = default;
  KernelConvLayer(nn::ParamStore& store, const std::string& name, nn::Index in, nn::Index out,
                  std::size_t kernel_count, Rng& rng);

  /// `h` comes from influence_matrix for the layer's kernel layout.
  [[nodiscard]] nn::Tensor operator()(const nn::Tensor& feats, const nn::SparseMatrix& h,
                                      bool training) const;

  nn::Tensor weight;  // [K*in, out]
  nn::BatchNorm norm;
  std::size_t kernel_count = 0;
};

}  // namespace skp::conv
