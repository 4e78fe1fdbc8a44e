#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "skp/nn/gradcheck.hpp"
#include "skp/nn/layers.hpp"
#include "skp/nn/ops.hpp"
#include "skp/nn/param_store.hpp"

using namespace skp;
using namespace skp::nn;

namespace {

Matrix random_matrix(Rng& rng, Index r, Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Scalar reduction with random weights so every output entry matters.
Tensor project(const Tensor& y, Rng& rng) { return weighted_sum(y, random_matrix(rng, y.rows(), y.cols())); }

void expect_gradients(const std::function<Tensor()>& loss, const std::vector<Tensor>& inputs) {
  const GradCheckResult r = check_gradients(loss, inputs, 1e-4, 1e-3);
  CHECK_MESSAGE(r.passed, "relative error " << r.max_relative_error);
}

}  // namespace

TEST_CASE("affine: identity weights and zero input") {
  Rng rng(1);
  const Matrix x = random_matrix(rng, 4, 3);
  const Tensor y = affine(Tensor(x), Tensor(Matrix::Identity(3, 3)), Tensor(Matrix::Zero(1, 3)));
  CHECK((y.value() - x).norm() == 0.0);
  const Matrix b = random_matrix(rng, 1, 2);
  const Tensor z = affine(Tensor(Matrix::Zero(5, 3)), Tensor(random_matrix(rng, 3, 2)), Tensor(b));
  for (Index r = 0; r < 5; ++r) CHECK((z.value().row(r) - b).norm() == 0.0);
}

TEST_CASE("affine: 3x4 times 4x2 gradients match finite differences") {
  Rng rng(2);
  Tensor x(random_matrix(rng, 3, 4), true), w(random_matrix(rng, 4, 2), true), b(random_matrix(rng, 1, 2), true);
  const Matrix proj = random_matrix(rng, 3, 2);
  const GradCheckResult r =
      check_gradients([&] { return weighted_sum(affine(x, w, b), proj); }, {x, w, b}, 1e-4, 1e-4);
  CHECK(r.passed);
}

TEST_CASE("affine: shape mismatch throws") {
  CHECK_THROWS_AS(affine(Tensor(Matrix::Zero(2, 3)), Tensor(Matrix::Zero(4, 2)), Tensor(Matrix::Zero(1, 2))),
                  ShapeError);
}

TEST_CASE("maxsub layer: lambda 0 is plain affine, single point with lambda 1 sees zeros") {
  ParamStore store;
  Rng rng(3);
  MaxSubPointLayer layer(store, "l", 3, 4, rng, 0.0);
  const Matrix x = random_matrix(rng, 6, 3);
  const Tensor y = layer(Tensor(x), 3);
  const Tensor plain = layer.linear(Tensor(x));
  CHECK((y.value() - plain.value()).norm() == 0.0);

  layer.lambda.mutable_value()(0, 0) = 1.0;
  const Tensor single = layer(Tensor(random_matrix(rng, 2, 3)), 1);
  for (Index r = 0; r < 2; ++r) CHECK((single.value().row(r) - layer.linear.bias.value()).norm() < 1e-15);
}

TEST_CASE("maxsub layer: permuting the points permutes the outputs") {
  ParamStore store;
  Rng rng(4);
  MaxSubPointLayer layer(store, "l", 3, 5, rng);
  const Matrix x = random_matrix(rng, 8, 3);
  std::vector<Index> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix xp(8, 3);
  for (Index i = 0; i < 8; ++i) xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  const Matrix y = layer(Tensor(x), 8).value();
  const Matrix yp = layer(Tensor(xp), 8).value();
  for (Index i = 0; i < 8; ++i) CHECK((yp.row(i) - y.row(perm[static_cast<std::size_t>(i)])).norm() < 1e-12);
}

TEST_CASE("part encoder: identical parts, point permutation, non-collapse, determinism") {
  ParamStore store;
  Rng rng(5);
  PartEncoder enc(store, "enc", EncoderConfig{{16, 32}}, rng);
  // Warm the running statistics so inference mode is not trivially the identity.
  for (int i = 0; i < 3; ++i) (void)enc(Tensor(random_matrix(rng, 4 * 16, 3)), 16, true);

  const Matrix part = random_matrix(rng, 16, 3);
  Matrix two(32, 3);
  two << part, part;
  const Matrix f = enc(Tensor(two), 16, false).value();
  CHECK((f.row(0) - f.row(1)).norm() == 0.0);

  Matrix shuffled = part;
  std::vector<Index> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (Index i = 0; i < 16; ++i) shuffled.row(i) = part.row(perm[static_cast<std::size_t>(i)]);
  const Matrix g = enc(Tensor(shuffled), 16, false).value();
  CHECK((g.row(0) - f.row(0)).norm() < 1e-12);
  CHECK((enc(Tensor(part), 16, false).value() - f.row(0)).norm() == 0.0);

  Matrix segment = Matrix::Zero(16, 3);
  for (Index i = 0; i < 16; ++i) segment(i, 0) = -1.0 + 2.0 * static_cast<double>(i) / 15.0;
  const Matrix zero_feat = enc(Tensor(Matrix::Zero(16, 3)), 16, false).value();
  const Matrix seg_feat = enc(Tensor(segment), 16, false).value();
  CHECK((zero_feat - seg_feat).norm() > 1e-6);
  CHECK(enc.out_features() == 32);
}

TEST_CASE("batch norm: training normalizes, inference with unit stats is the identity") {
  Rng rng(6);
  Matrix x = random_matrix(rng, 50, 3);
  x.col(1) = x.col(1) * 7.0 + Matrix::Constant(50, 1, 3.0);
  const RowVector shift = (RowVector(3) << 0.5, -1.0, 2.0).finished();
  const RowVector scl = (RowVector(3) << 2.0, 0.5, 1.5).finished();
  const Matrix y = batch_norm_train(Tensor(x), Tensor(Matrix(scl)), Tensor(Matrix(shift)), 1e-12).value();
  for (Index c = 0; c < 3; ++c) {
    const double mean = y.col(c).mean();
    const double var = (y.col(c).array() - mean).square().mean();
    CHECK(mean == doctest::Approx(shift(c)).epsilon(1e-5));
    CHECK(var == doctest::Approx(scl(c) * scl(c)).epsilon(1e-5));
  }
  const Matrix id = batch_norm_infer(Tensor(x), Tensor(Matrix::Ones(1, 3)), Tensor(Matrix::Zero(1, 3)),
                                     RowVector::Zero(3), RowVector::Ones(3), 0.0)
                        .value();
  CHECK((id - x).norm() == 0.0);
}

TEST_CASE("batch norm: 4x3 gradients match finite differences") {
  Rng rng(7);
  Tensor x(random_matrix(rng, 4, 3), true), g(random_matrix(rng, 1, 3), true), b(random_matrix(rng, 1, 3), true);
  const Matrix proj = random_matrix(rng, 4, 3);
  const GradCheckResult r =
      check_gradients([&] { return weighted_sum(batch_norm_train(x, g, b, 1e-5), proj); }, {x, g, b}, 1e-4, 1e-4);
  CHECK(r.passed);
}

TEST_CASE("batch norm layer updates running statistics and needs two rows") {
  ParamStore store;
  BatchNorm bn(store, "bn", 2, 0.5);
  Matrix x(2, 2);
  x << 1, 2, 3, 6;
  (void)bn(Tensor(x), true);
  CHECK(bn.running_mean.value()(0, 0) == doctest::Approx(1.0));   // 0.5 * 0 + 0.5 * 2
  CHECK(bn.running_mean.value()(0, 1) == doctest::Approx(2.0));
  CHECK_THROWS(bn(Tensor(Matrix::Zero(1, 2)), true));
}

TEST_CASE("softmax cross entropy: uniform, dominant, gradients") {
  const Tensor uniform = softmax_cross_entropy(Tensor(Matrix::Zero(3, 4)), {0, 1, 3});
  CHECK(uniform.value()(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Matrix dominant = Matrix::Zero(1, 3);
  dominant(0, 2) = 1000.0;
  const double l = softmax_cross_entropy(Tensor(dominant), {2}).value()(0, 0);
  CHECK(std::isfinite(l));
  CHECK(l < 1e-12);

  Rng rng(8);
  Tensor logits(random_matrix(rng, 5, 3), true);
  const GradCheckResult r =
      check_gradients([&] { return softmax_cross_entropy(logits, {0, 2, 1, 1, 0}); }, {logits}, 1e-4, 1e-4);
  CHECK(r.passed);
  CHECK_THROWS(softmax_cross_entropy(logits, {0, 1}));
  CHECK_THROWS(softmax_cross_entropy(logits, {0, 1, 2, 3, 0}));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(9);
  const Matrix p = softmax_rows(random_matrix(rng, 6, 4) * 50.0);
  for (Index r = 0; r < 6; ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0));
}

TEST_CASE("every differentiable op passes finite differences over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    Tensor a(random_matrix(rng, 6, 4), true), b(random_matrix(rng, 4, 3), true);
    Tensor c(random_matrix(rng, 6, 4), true), lam(random_matrix(rng, 1, 1), true);
    const Matrix pa = random_matrix(rng, 6, 3), p4 = random_matrix(rng, 6, 4), p2 = random_matrix(rng, 2, 4);
    const Matrix p3 = random_matrix(rng, 3, 4), p12 = random_matrix(rng, 12, 2);
    expect_gradients([&] { return weighted_sum(matmul(a, b), pa); }, {a, b});
    expect_gradients([&] { return weighted_sum(relu(a), p4); }, {a});
    expect_gradients([&] { return weighted_sum(add(a, c), p4); }, {a, c});
    expect_gradients([&] { return weighted_sum(scale(a, -2.5), p4); }, {a});
    expect_gradients([&] { return weighted_sum(group_max(a, 3), p2); }, {a});
    expect_gradients([&] { return weighted_sum(max_subtract(a, lam, 3), p4); }, {a, lam});
    expect_gradients([&] { return weighted_sum(gather_max(a, {{0, 2, 5}, {1}, {3, 4, 1}}), p3); }, {a});
    expect_gradients([&] { return weighted_sum(select_rows(a, {5, 0, 5}), p3); }, {a});
    expect_gradients([&] { return weighted_sum(reshape(a, 12, 2), p12); }, {a});
    expect_gradients([&] { return weighted_row_sqnorm(a, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}); }, {a});

    SparseMatrix h(3, 6);
    h.insert(0, 1) = 0.5;
    h.insert(2, 4) = -1.5;
    h.insert(2, 0) = 2.0;
    h.makeCompressed();
    expect_gradients([&] { return weighted_sum(sparse_matmul(h, a), p3); }, {a});

    Tensor g(random_matrix(rng, 1, 4), true), be(random_matrix(rng, 1, 4), true);
    const RowVector mean = random_matrix(rng, 1, 4);
    const RowVector var = random_matrix(rng, 1, 4).array().abs() + 0.5;
    expect_gradients([&] { return weighted_sum(batch_norm_infer(a, g, be, mean, var, 1e-5), p4); }, {a, g, be});
  }
}

TEST_CASE("adam: zero gradient, first step, quadratic bowl") {
  {
    ParamStore store;
    Tensor w = store.add("w", Matrix::Constant(1, 2, 0.3));
    w.node().grad = Matrix::Zero(1, 2);
    adam_step(store, AdamConfig{0.1});
    CHECK((w.value() - Matrix::Constant(1, 2, 0.3)).norm() == 0.0);
  }
  {
    ParamStore store;
    Tensor w = store.add("w", Matrix::Constant(1, 1, 2.0));
    w.node().grad = Matrix::Constant(1, 1, 1.0);
    adam_step(store, AdamConfig{0.1});
    CHECK(w.value()(0, 0) == doctest::Approx(1.9).epsilon(1e-6));
  }
  {
    ParamStore store;
    Tensor w = store.add("w", (Matrix(1, 3) << 0.6, 0.0, 0.8).finished());
    for (int i = 0; i < 200; ++i) {
      store.zero_grad();
      weighted_row_sqnorm(w, {1.0}).backward();
      adam_step(store, AdamConfig{0.05});
    }
    CHECK(w.value().norm() < 1e-2);
  }
  {
    ParamStore store;
    (void)store.add("w", Matrix::Zero(1, 1));
    CHECK_THROWS_AS(adam_step(store, AdamConfig{}), std::logic_error);
  }
}

TEST_CASE("param store: duplicate names and bit-exact round trip") {
  ParamStore store;
  Rng rng(11);
  Linear lin(store, "lin", 3, 4, rng);
  BatchNorm bn(store, "bn", 4);
  CHECK_THROWS(store.add("lin.weight", Matrix::Zero(1, 1)));
  for (int i = 0; i < 3; ++i) {
    store.zero_grad();
    weighted_sum(bn(lin(Tensor(random_matrix(rng, 5, 3))), true), random_matrix(rng, 5, 4)).backward();
    adam_step(store, AdamConfig{});
  }
  std::stringstream ss;
  store.save(ss);
  const std::string bytes = ss.str();

  ParamStore other;
  Rng rng2(99);
  Linear lin2(other, "lin", 3, 4, rng2);
  BatchNorm bn2(other, "bn", 4);
  other.load(ss);
  CHECK(other.step == store.step);
  for (std::size_t i = 0; i < store.params().size(); ++i) {
    const Parameter& a = store.params()[i];
    const Parameter& b = other.params()[i];
    CHECK(a.name == b.name);
    CHECK(a.tensor.value() == b.tensor.value());
    CHECK(a.adam_m == b.adam_m);
    CHECK(a.adam_v == b.adam_v);
  }
  std::stringstream again;
  other.save(again);
  CHECK(again.str() == bytes);

  ParamStore mismatched;
  Rng rng3(1);
  Linear wrong(mismatched, "lin", 3, 5, rng3);
  std::stringstream in(bytes);
  CHECK_THROWS(mismatched.load(in));
}

TEST_CASE("checkpoint file keeps metadata and parameters") {
  ParamStore store;
  Rng rng(12);
  Linear lin(store, "lin", 2, 2, rng);
  const auto path = std::filesystem::temp_directory_path() / "skp_nn_test.ckpt";
  save_checkpoint(path, store, "seed=4\n");
  CHECK(read_checkpoint_metadata(path) == "seed=4\n");
  ParamStore other;
  Rng rng2(13);
  Linear lin2(other, "lin", 2, 2, rng2);
  CHECK(load_checkpoint(path, other) == "seed=4\n");
  CHECK(lin2.weight.value() == lin.weight.value());
  std::filesystem::remove(path);
  CHECK_THROWS(read_checkpoint_metadata(path));
}
