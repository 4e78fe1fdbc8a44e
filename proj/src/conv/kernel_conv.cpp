#include "skp/conv/kernel_conv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace skp::conv {

KernelLayout make_kernel_layout(std::size_t sphere_count, double sigma, bool with_origin) {
  if (sphere_count < 2) throw std::invalid_argument("kernel layout: need at least 2 sphere kernels");
  if (!(sigma > 0.0)) throw std::invalid_argument("kernel layout: sigma must be > 0");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  KernelLayout layout;
  layout.sigma = sigma;
  layout.has_origin = with_origin;
  // Offset lattice: pulling the end rows off the poles spreads small K
  // more evenly than the plain pole-to-pole lattice.
  constexpr double kOffset = 0.36;
  const double span = static_cast<double>(sphere_count - 1) + 2.0 * kOffset;
  for (std::size_t i = 0; i < sphere_count; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + kOffset) / span;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    layout.centers.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    layout.centers.back().normalize();
  }
  if (with_origin) layout.centers.emplace_back(Vec3::Zero());
  return layout;
}

double influence(const Vec3& p, const Vec3& c, double sigma) {
  return std::max(0.0, 1.0 - (p - c).norm() / sigma);
}

ConvKind parse_conv_kind(const std::string& name) {
  if (name == "skpconv") return ConvKind::skpconv;
  if (name == "kpconv") return ConvKind::kpconv;
  throw std::invalid_argument("unknown layer kind '" + name + "' (expected skpconv|kpconv)");
}

std::string to_string(ConvKind kind) { return kind == ConvKind::skpconv ? "skpconv" : "kpconv"; }

void GraphNeighborhood::validate() const {
  if (neighbors.size() != centers.size() || rotations.size() != centers.size()) {
    throw nn::ShapeError("neighborhood: centers/neighbors/rotations sizes differ");
  }
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    for (std::size_t j : neighbors[i]) {
      if (j >= centers.size()) throw std::out_of_range("neighborhood: neighbor index out of range");
      if (j == i) throw std::invalid_argument("neighborhood: self in neighbor list");
    }
  }
}

GraphNeighborhood make_neighborhood(const PartGraph& graph, bool use_lrf) {
  GraphNeighborhood n;
  n.neighbors = graph.neighbor_lists();
  for (const Part& p : graph.parts) {
    n.centers.push_back(p.center);
    n.rotations.push_back(use_lrf ? p.lrf : Mat3::Identity());
  }
  return n;
}

GraphNeighborhood concatenate(const std::vector<const GraphNeighborhood*>& parts) {
  GraphNeighborhood out;
  for (const GraphNeighborhood* g : parts) {
    const std::size_t offset = out.centers.size();
    out.centers.insert(out.centers.end(), g->centers.begin(), g->centers.end());
    out.rotations.insert(out.rotations.end(), g->rotations.begin(), g->rotations.end());
    for (const auto& list : g->neighbors) {
      auto& dst = out.neighbors.emplace_back();
      dst.reserve(list.size());
      for (std::size_t j : list) dst.push_back(j + offset);
    }
  }
  return out;
}

Vec3 kernel_offset(const GraphNeighborhood& nbhd, std::size_t i, std::size_t j, ConvKind kind) {
  Vec3 d = nbhd.rotations[i] * (nbhd.centers[j] - nbhd.centers[i]);
  if (kind == ConvKind::skpconv) {
    const double len = d.norm();
    d = len < 1e-9 ? Vec3(Vec3::Zero()) : Vec3(d / len);
  }
  return d;
}

std::vector<double> kernel_influences(const Vec3& offset, const KernelLayout& layout) {
  std::vector<double> h;
  h.reserve(layout.size());
  for (const Vec3& c : layout.centers) h.push_back(influence(offset, c, layout.sigma));
  return h;
}

nn::SparseMatrix influence_matrix(const GraphNeighborhood& nbhd, const KernelLayout& layout,
                                  ConvKind kind, bool include_self) {
  nbhd.validate();
  const std::size_t n = nbhd.size();
  const std::size_t k = layout.size();
  std::vector<Eigen::Triplet<nn::Scalar>> triplets;
  auto push = [&](std::size_t i, std::size_t j, const Vec3& offset) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double h = influence(offset, layout.centers[kk], layout.sigma);
      if (h > 0.0) {
        triplets.emplace_back(static_cast<int>(i * k + kk), static_cast<int>(j), static_cast<nn::Scalar>(h));
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (include_self) push(i, i, Vec3::Zero());
    for (std::size_t j : nbhd.neighbors[i]) push(i, j, kernel_offset(nbhd, i, j, kind));
  }
  nn::SparseMatrix h(static_cast<nn::Index>(n * k), static_cast<nn::Index>(n));
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

nn::Tensor kernel_conv(const nn::Tensor& feats, const nn::SparseMatrix& h, const nn::Tensor& w,
                       nn::Index kernel_count) {
  const nn::Index n = feats.rows();
  const nn::Index fin = feats.cols();
  if (h.cols() != n || h.rows() != n * kernel_count) throw nn::ShapeError("kernel_conv: influence matrix shape");
  if (w.rows() != kernel_count * fin) throw nn::ShapeError("kernel_conv: weight must be [K*Fin, Fout]");
  const nn::Tensor aggregated = nn::sparse_matmul(h, feats);  // [N*K, Fin]
  return nn::matmul(nn::reshape(aggregated, n, kernel_count * fin), w);
}

namespace {

nn::Tensor forward(const nn::Tensor& feats, const GraphNeighborhood& nbhd, const KernelLayout& layout,
                   const nn::Tensor& w, ConvKind kind) {
  if (static_cast<std::size_t>(feats.rows()) != nbhd.size()) {
    throw nn::ShapeError("kernel conv: feature rows != node count");
  }
  const auto h = influence_matrix(nbhd, layout, kind, false);
  return kernel_conv(feats, h, w, static_cast<nn::Index>(layout.size()));
}

}  // namespace

nn::Tensor kpconv_forward(const nn::Tensor& feats, const GraphNeighborhood& nbhd,
                          const KernelLayout& layout, const nn::Tensor& w) {
  return forward(feats, nbhd, layout, w, ConvKind::kpconv);
}

nn::Tensor skpconv_forward(const nn::Tensor& feats, const GraphNeighborhood& nbhd,
                           const KernelLayout& layout, const nn::Tensor& w) {
  return forward(feats, nbhd, layout, w, ConvKind::skpconv);
}

KernelConvLayer::KernelConvLayer(nn::ParamStore& store, const std::string& name, nn::Index in,
                                 nn::Index out, std::size_t kernels, Rng& rng)
    : norm(store, name + ".bn", out), kernel_count(kernels) {
  const auto k = static_cast<nn::Index>(kernels);
  const nn::Scalar bound = std::sqrt(nn::Scalar(6) / static_cast<nn::Scalar>(in * 2));
  std::uniform_real_distribution<nn::Scalar> dist(-bound, bound);
  nn::Matrix w(k * in, out);
  for (nn::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  weight = store.add(name + ".weight", std::move(w), true,
                     {kernels, static_cast<std::size_t>(in), static_cast<std::size_t>(out)});
}

nn::Tensor KernelConvLayer::operator()(const nn::Tensor& feats, const nn::SparseMatrix& h,
                                       bool training) const {
  const nn::Tensor conv = kernel_conv(feats, h, weight, static_cast<nn::Index>(kernel_count));
  return nn::relu(norm(conv, training));
}

}  // namespace skp::conv
