#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "skp/conv/kernel_conv.hpp"
#include "skp/nn/gradcheck.hpp"
#include "skp/nn/ops.hpp"
#include "skp/parts/part_graph.hpp"

using namespace skp;
using namespace skp::conv;
using nn::Index;
using nn::Matrix;
using nn::Tensor;

namespace {

Matrix random_matrix(Rng& rng, Index r, Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

Mat3 random_rotation(Rng& rng) {
  const Vec3 axis = testutil::random_unit(rng);
  const double angle = std::uniform_real_distribution<double>(0, 6.28)(rng);
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

GraphNeighborhood random_graph(std::size_t n, Rng& rng, bool rotations) {
  GraphNeighborhood g;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution edge(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    g.centers.emplace_back(u(rng), u(rng), u(rng));
    g.rotations.push_back(rotations ? random_rotation(rng) : Mat3::Identity());
  }
  g.neighbors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && edge(rng)) g.neighbors[i].push_back(j);
    }
  }
  return g;
}


Matrix run(ConvKind kind, const Matrix& f, const GraphNeighborhood& g, const KernelLayout& layout, const Matrix& w) {
  return kind == ConvKind::kpconv ? kpconv_forward(Tensor(f), g, layout, Tensor(w)).value()
                                  : skpconv_forward(Tensor(f), g, layout, Tensor(w)).value();
}

}  // namespace

TEST_CASE("kernel layout: Fibonacci placement") {
  CHECK((make_kernel_layout(2, 0.7, false).centers[0] - make_kernel_layout(2, 0.7, false).centers[1]).norm() > 1.9);
  for (std::size_t k : {2u, 6u, 14u, 20u}) {
    const KernelLayout l = make_kernel_layout(k, 0.7, false);
    REQUIRE(l.size() == k);
    double min_dist = 1e9;
    for (std::size_t a = 0; a < k; ++a) {
      CHECK(std::abs(l.centers[a].norm() - 1.0) < 1e-9);
      for (std::size_t b = a + 1; b < k; ++b) min_dist = std::min(min_dist, (l.centers[a] - l.centers[b]).norm());
    }
    CHECK(min_dist > 0.1);
    if (k == 6) CHECK(min_dist > 0.9);
  }
  const KernelLayout with_origin = make_kernel_layout(14, 0.7, true);
  CHECK(with_origin.size() == 15);
  CHECK(with_origin.centers.back().norm() == 0.0);
  CHECK_THROWS(make_kernel_layout(1, 0.7, false));
  CHECK_THROWS(make_kernel_layout(4, 0.0, false));
}

TEST_CASE("influence: center, boundary, midpoint") {
  const Vec3 c(0.3, -0.2, 0.5);
  CHECK(influence(c, c, 0.7) == 1.0);
  CHECK(influence(c + Vec3(0.7, 0, 0), c, 0.7) == doctest::Approx(0.0));
  CHECK(influence(c + Vec3(0, 0.35, 0), c, 0.7) == doctest::Approx(0.5));
  CHECK(influence(c + Vec3(0, 0, 3), c, 0.7) == 0.0);
}

TEST_CASE("kpconv: one active kernel and empty neighbor lists") {
  KernelLayout layout;
  layout.centers = {Vec3(1, 0, 0), Vec3(-1, 0, 0)};
  layout.sigma = 0.5;
  GraphNeighborhood g;
  g.centers = {Vec3::Zero(), Vec3(1, 0, 0), Vec3(5, 5, 5)};
  g.rotations.assign(3, Mat3::Identity());
  g.neighbors = {{1}, {}, {}};
  Rng rng(1);
  const Matrix f = random_matrix(rng, 3, 2), w = random_matrix(rng, 4, 3);
  const Matrix out = run(ConvKind::kpconv, f, g, layout, w);
  CHECK((out.row(0) - f.row(1) * w.topRows(2)).norm() < 1e-12);
  CHECK(out.row(1).norm() == 0.0);
  CHECK(out.row(2).norm() == 0.0);
}

TEST_CASE("kpconv and skpconv equal the naive triple loop") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const GraphNeighborhood g = random_graph(5, rng, true);
    const KernelLayout layout = make_kernel_layout(4, 0.9, false);
    const Matrix f = random_matrix(rng, 5, 3), w = random_matrix(rng, 12, 2);
    for (ConvKind kind : {ConvKind::kpconv, ConvKind::skpconv}) {
      const Matrix expected = oracle::naive_conv(f, g, layout, w, kind == ConvKind::skpconv);
      CHECK((run(kind, f, g, layout, w) - expected).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("kpconv: shape mismatch and bad neighbor index throw") {
  Rng rng(2);
  GraphNeighborhood g = random_graph(4, rng, false);
  const KernelLayout layout = make_kernel_layout(4, 0.7, false);
  CHECK_THROWS(kpconv_forward(Tensor(random_matrix(rng, 4, 3)), g, layout, Tensor(random_matrix(rng, 11, 2))));
  CHECK_THROWS(kpconv_forward(Tensor(random_matrix(rng, 3, 3)), g, layout, Tensor(random_matrix(rng, 12, 2))));
  g.neighbors[0].push_back(9);
  CHECK_THROWS(kpconv_forward(Tensor(random_matrix(rng, 4, 3)), g, layout, Tensor(random_matrix(rng, 12, 2))));
}

TEST_CASE("skpconv: direction-only influence") {
  const KernelLayout layout = make_kernel_layout(14, 0.7, true);
  GraphNeighborhood g;
  g.centers = {Vec3::Zero(), Vec3(0.1, 0.05, 0.02), Vec3(10, 5, 2)};
  g.rotations.assign(3, Mat3::Identity());
  g.neighbors = {{1, 2}, {}, {}};
  const auto near = kernel_influences(kernel_offset(g, 0, 1, ConvKind::skpconv), layout);
  const auto far = kernel_influences(kernel_offset(g, 0, 2, ConvKind::skpconv), layout);
  for (std::size_t k = 0; k < near.size(); ++k) CHECK(near[k] == doctest::Approx(far[k]).epsilon(1e-12));

  // A coincident neighbor only reaches the origin kernel.
  g.centers[1] = Vec3::Zero();
  const auto zero = kernel_influences(kernel_offset(g, 0, 1, ConvKind::skpconv), layout);
  for (std::size_t k = 0; k + 1 < zero.size(); ++k) CHECK(zero[k] == 0.0);
  CHECK(zero.back() == 1.0);
}

TEST_CASE("skpconv is scale invariant, kpconv is not") {
  Rng rng(3);
  GraphNeighborhood g = random_graph(6, rng, true);
  const KernelLayout layout = make_kernel_layout(8, 0.7, true);
  const Matrix f = random_matrix(rng, 6, 4), w = random_matrix(rng, 9 * 4, 3);
  const Matrix s_base = run(ConvKind::skpconv, f, g, layout, w);
  const Matrix k_base = run(ConvKind::kpconv, f, g, layout, w);
  for (double s : {0.1, 3.0, 10.0}) {
    GraphNeighborhood scaled = g;
    for (Vec3& c : scaled.centers) c *= s;
    CHECK((run(ConvKind::skpconv, f, scaled, layout, w) - s_base).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((run(ConvKind::kpconv, f, scaled, layout, w) - k_base).cwiseAbs().maxCoeff() > 1e-3);
  }
}

TEST_CASE("skpconv equals kpconv on pre-normalized offsets") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(50 + seed);
    // Star graphs: every neighbor of node 0 sits at unit distance in node 0's frame.
    GraphNeighborhood g;
    g.centers.push_back(Vec3(0.3, -0.1, 0.2));
    g.rotations.push_back(random_rotation(rng));
    g.neighbors.resize(7);
    for (std::size_t j = 1; j < 7; ++j) {
      const Vec3 dir = testutil::random_unit(rng);
      g.centers.push_back(g.centers[0] + g.rotations[0].transpose() * dir);
      g.rotations.push_back(random_rotation(rng));
      g.neighbors[0].push_back(j);
    }
    const KernelLayout layout = make_kernel_layout(14, 0.7, true);
    const Matrix f = random_matrix(rng, 7, 3), w = random_matrix(rng, 15 * 3, 2);
    const Matrix a = run(ConvKind::skpconv, f, g, layout, w);
    const Matrix b = run(ConvKind::kpconv, f, g, layout, w);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("skpconv: rotation about z with recomputed frames leaves outputs unchanged") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(70 + seed);
    std::vector<Part> parts;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 8; ++i) {
      Part p;
      p.center = Vec3(u(rng), u(rng), u(rng));
      Vec3 n = testutil::random_unit(rng);
      if (std::abs(n.z()) > 0.9) n = Vec3(1, 0, 0.2).normalized();
      p.normal = n;
      parts.push_back(p);
    }
    auto build = [&](const Mat3& rz) {
      PartGraph graph;
      graph.parts = parts;
      for (Part& p : graph.parts) {
        p.center = rz * p.center;
        p.normal = rz * p.normal;
        const LocalFrame f = lrf_from_normal(p.normal);
        p.lrf = f.rotation;
        p.degenerate_lrf = f.degenerate;
      }
      graph.edges = connect_parts(graph.parts, ConnectConfig{});
      return make_neighborhood(graph, true);
    };
    const GraphNeighborhood g0 = build(Mat3::Identity());
    const GraphNeighborhood g1 = build(rotation_about_z(std::uniform_real_distribution<double>(0, 6.28)(rng)));
    CHECK(g0.neighbors == g1.neighbors);
    const KernelLayout layout = make_kernel_layout(14, 0.7, true);
    const Matrix f = random_matrix(rng, 8, 3), w = random_matrix(rng, 15 * 3, 2);
    CHECK((run(ConvKind::skpconv, f, g0, layout, w) - run(ConvKind::skpconv, f, g1, layout, w)).cwiseAbs().maxCoeff() <
          1e-5);
  }
}

TEST_CASE("skpconv: support and linearity") {
  Rng rng(4);
  const KernelLayout layout = make_kernel_layout(6, 0.5, false);
  GraphNeighborhood g = random_graph(5, rng, true);
  const Matrix f = random_matrix(rng, 5, 3), h = random_matrix(rng, 5, 3), w = random_matrix(rng, 18, 2);
  const double a = 1.7, b = -0.4;
  const Matrix lhs = run(ConvKind::skpconv, a * f + b * h, g, layout, w);
  const Matrix rhs = a * run(ConvKind::skpconv, f, g, layout, w) + b * run(ConvKind::skpconv, h, g, layout, w);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-6);

  // A neighbor outside every kernel's support changes nothing.
  KernelLayout narrow;
  narrow.centers = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  narrow.sigma = 0.3;
  GraphNeighborhood s;
  s.centers = {Vec3::Zero(), Vec3(2, 0, 0), Vec3(0, 0, 1)};
  s.rotations.assign(3, Mat3::Identity());
  s.neighbors = {{1}, {}, {}};
  const Matrix fs = random_matrix(rng, 3, 2), ws = random_matrix(rng, 4, 2);
  const Matrix before = run(ConvKind::skpconv, fs, s, narrow, ws);
  s.neighbors[0].push_back(2);
  CHECK((run(ConvKind::skpconv, fs, s, narrow, ws) - before).norm() == 0.0);
}

TEST_CASE("influence matrix: self loop enters through the zero offset") {
  Rng rng(5);
  const GraphNeighborhood g = random_graph(4, rng, false);
  const KernelLayout layout = make_kernel_layout(6, 0.7, true);
  const nn::SparseMatrix without = influence_matrix(g, layout, ConvKind::skpconv, false);
  const nn::SparseMatrix with = influence_matrix(g, layout, ConvKind::skpconv, true);
  CHECK(without.rows() == 4 * 7);
  CHECK(without.cols() == 4);
  const Matrix diff = Matrix(with) - Matrix(without);
  for (Index i = 0; i < 4; ++i) {
    for (Index k = 0; k < 7; ++k) {
      for (Index j = 0; j < 4; ++j) {
        const double expected = (i == j && k == 6) ? 1.0 : 0.0;
        CHECK(diff(i * 7 + k, j) == doctest::Approx(expected));
      }
    }
  }
}

TEST_CASE("kernel conv layer: gradients and isolated nodes") {
  Rng rng(6);
  const GraphNeighborhood g = random_graph(4, rng, true);
  const KernelLayout layout = make_kernel_layout(4, 0.9, true);
  const nn::SparseMatrix h = influence_matrix(g, layout, ConvKind::skpconv);
  Tensor f(random_matrix(rng, 4, 3), true), w(random_matrix(rng, 15, 2), true);
  const Matrix proj = random_matrix(rng, 4, 2);
  const nn::GradCheckResult r =
      nn::check_gradients([&] { return nn::weighted_sum(kernel_conv(f, h, w, 5), proj); }, {f, w}, 1e-4, 1e-3);
  CHECK(r.passed);

  nn::ParamStore store;
  KernelConvLayer layer(store, "c", 3, 4, layout.size(), rng);
  GraphNeighborhood lonely = g;
  lonely.neighbors[2].clear();
  const Matrix out = layer(Tensor(random_matrix(rng, 4, 3)), influence_matrix(lonely, layout, ConvKind::skpconv), true)
                         .value();
  CHECK(out.allFinite());
  CHECK((out.array() >= 0.0).all());
}
