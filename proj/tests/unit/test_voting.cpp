#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "skp/nn/layers.hpp"
#include "skp/nn/ops.hpp"
#include "skp/voting/voting.hpp"

using namespace skp;
using namespace skp::voting;
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
  return Eigen::AngleAxisd(std::uniform_real_distribution<double>(0, 6.28)(rng), axis).toRotationMatrix();
}

std::vector<PartFrame> random_frames(std::size_t n, Rng& rng) {
  std::vector<PartFrame> frames;
  std::uniform_real_distribution<double> u(-2.0, 2.0), s(0.1, 1.0);
  for (std::size_t i = 0; i < n; ++i) frames.push_back({Vec3(u(rng), u(rng), u(rng)), random_rotation(rng), s(rng)});
  return frames;
}

ClusterPrediction with_confidence(double c, std::size_t cls) {
  ClusterPrediction p;
  p.confidence = c;
  p.predicted_class = cls;
  p.members = {0};
  return p;
}

}  // namespace

TEST_CASE("cast_votes: zero offsets, identity frames, round trip") {
  Rng rng(1);
  const auto frames = random_frames(6, rng);
  const Matrix zero = cast_votes(Tensor(Matrix::Zero(6, 3)), frames).value();
  for (std::size_t i = 0; i < 6; ++i) CHECK((Vec3(zero.row(static_cast<Index>(i))) - frames[i].center).norm() == 0.0);

  std::vector<PartFrame> flat{{Vec3(1, 2, 3), Mat3::Identity(), 1.0}};
  const Matrix d = (Matrix(1, 3) << 0.5, -0.5, 2.0).finished();
  CHECK((cast_votes(Tensor(d), flat).value() - (Matrix(1, 3) << 1.5, 1.5, 5.0).finished()).norm() < 1e-15);

  const Matrix raw = random_matrix(rng, 6, 3);
  const Matrix votes = cast_votes(Tensor(raw), frames).value();
  for (std::size_t i = 0; i < 6; ++i) {
    const Vec3 local = frames[i].lrf * (Vec3(votes.row(static_cast<Index>(i))) - frames[i].center);
    CHECK((local - frames[i].scale * Vec3(raw.row(static_cast<Index>(i)))).norm() < 1e-6);
  }
}

TEST_CASE("predict_votes: local offsets and votes agree") {
  Rng rng(2);
  nn::ParamStore store;
  const nn::MlpHead head(store, "vote", 8, 4, 3, rng);
  const auto frames = random_frames(5, rng);
  const VoteSet set = predict_votes(Tensor(random_matrix(rng, 5, 8)), frames, head);
  REQUIRE(set.positions.size() == 5);
  REQUIRE(set.offsets.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK((set.positions[i] - Vec3(set.votes.value().row(static_cast<Index>(i)))).norm() == 0.0);
    CHECK((frames[i].lrf * (set.positions[i] - frames[i].center) - set.offsets[i]).norm() < 1e-9);
  }
  CHECK_THROWS(predict_votes(Tensor(random_matrix(rng, 4, 8)), frames, head));
}

TEST_CASE("vote_loss: origin, single vote, brute force") {
  CHECK(vote_loss(Tensor(Matrix::Zero(4, 3))).value()(0, 0) == 0.0);
  CHECK(vote_loss(Tensor((Matrix(1, 3) << 0, 0, 2).finished())).value()(0, 0) == doctest::Approx(4.0));
  Rng rng(3);
  const Matrix v = random_matrix(rng, 9, 3);
  double expected = 0.0;
  for (Index r = 0; r < 9; ++r) expected += v.row(r).squaredNorm();
  CHECK(vote_loss(Tensor(v)).value()(0, 0) == doctest::Approx(expected / 9.0).epsilon(1e-12));
}

TEST_CASE("cluster_votes: coincident votes and separated blobs") {
  const std::vector<Vec3> same(7, Vec3(1, 1, 1));
  for (const Cluster& c : cluster_votes(same, 3, 0.1)) CHECK(c.members.size() == 7);

  Rng rng(4);
  std::normal_distribution<double> g(0.0, 0.01);
  std::vector<Vec3> blobs;
  for (int i = 0; i < 10; ++i) blobs.emplace_back(g(rng), g(rng), g(rng));
  for (int i = 0; i < 10; ++i) blobs.emplace_back(5 + g(rng), g(rng), g(rng));
  const auto clusters = cluster_votes(blobs, 2, 0.5);
  REQUIRE(clusters.size() == 2);
  CHECK(clusters[0].center_part == 0);
  std::vector<std::size_t> first(10), second(10);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), 10);
  CHECK(clusters[0].members == first);
  CHECK(clusters[1].members == second);
}

TEST_CASE("cluster_votes: centers follow FPS and members equal a brute-force radius query") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto votes = testutil::random_points(30, seed);
    const double radius = 0.6;
    const auto clusters = cluster_votes(votes, 5, radius);
    REQUIRE(clusters.size() == 5);
    const auto fps = farthest_point_sampling(votes, 5, 0);
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(clusters[c].center_part == fps[c]);
      CHECK(clusters[c].center == votes[fps[c]]);
      std::vector<std::size_t> expected;
      for (std::size_t i = 0; i < votes.size(); ++i) {
        if ((votes[i] - votes[fps[c]]).norm() <= radius) expected.push_back(i);
      }
      CHECK(clusters[c].members == expected);
    }
  }
  CHECK(cluster_votes(testutil::random_points(3, 1), 5, 0.1).size() == 3);
  CHECK_THROWS(cluster_votes({}, 5, 0.1));
}

TEST_CASE("classify_clusters: single member, duplicates, permutation, empty") {
  Rng rng(5);
  nn::ParamStore store;
  const nn::MlpHead head(store, "cls", 6, 3, 4, rng);
  const Tensor feats(random_matrix(rng, 5, 6));
  Cluster single;
  single.members = {3};
  const ClusterScores one = classify_clusters({single}, feats, head);
  const Matrix direct = head(nn::select_rows(feats, {3})).value();
  CHECK((one.logits.value() - direct).norm() < 1e-15);
  CHECK(one.predictions[0].confidence > 0.0);
  CHECK(one.predictions[0].confidence <= 1.0);

  Cluster a, b, c;
  a.members = {0, 2, 4};
  b.members = {0, 2, 2, 4};
  c.members = {4, 0, 2};
  const Matrix la = classify_clusters({a}, feats, head).logits.value();
  CHECK((classify_clusters({b}, feats, head).logits.value() - la).norm() == 0.0);
  CHECK((classify_clusters({c}, feats, head).logits.value() - la).norm() == 0.0);

  // Offsets address rows of stacked objects.
  Cluster shifted;
  shifted.members = {1};
  CHECK((classify_clusters({shifted}, feats, head, 2).logits.value() - direct).norm() < 1e-15);

  CHECK_THROWS(classify_clusters({Cluster{}}, feats, head));
}

TEST_CASE("select_prediction: single, ordering, ties, monotone rescaling") {
  CHECK(select_prediction({with_confidence(0.3, 2)}) == 0);
  CHECK(select_prediction({with_confidence(0.9, 1), with_confidence(0.4, 3)}) == 0);
  CHECK(select_prediction({with_confidence(0.4, 1), with_confidence(0.9, 3)}) == 1);
  CHECK(select_prediction({with_confidence(0.5, 1), with_confidence(0.5, 3), with_confidence(0.5, 0)}) == 0);
  Rng rng(6);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClusterPrediction> preds;
    for (std::size_t i = 0; i < 5; ++i) preds.push_back(with_confidence(u(rng), i));
    const std::size_t base = select_prediction(preds);
    for (auto& p : preds) p.confidence = std::sqrt(p.confidence) * 0.5;
    CHECK(select_prediction(preds) == base);
  }
}

TEST_CASE("total_loss: lambda weighting and gradient reaching both heads") {
  const Tensor cl = Tensor::scalar(0.5), vl = Tensor::scalar(0.25);
  CHECK(total_loss(cl, vl, 0.0).value()(0, 0) == 0.5);
  CHECK(total_loss(cl, vl, 1.0).value()(0, 0) == 0.75);

  Rng rng(7);
  nn::ParamStore store;
  const nn::MlpHead vote_head(store, "vote", 6, 3, 3, rng);
  const nn::MlpHead class_head(store, "cls", 6, 3, 2, rng);
  const Tensor feats(random_matrix(rng, 4, 6));
  const VoteSet votes = predict_votes(feats, random_frames(4, rng), vote_head);
  const auto clusters = cluster_votes(votes.positions, 2, 10.0);
  const ClusterScores scores = classify_clusters(clusters, feats, class_head);
  const Tensor loss = total_loss(nn::softmax_cross_entropy(scores.logits, std::vector<std::size_t>(clusters.size(), 1)),
                                 vote_loss(votes.votes), 1.0);
  loss.backward();
  CHECK(vote_head.second.weight.has_grad());
  CHECK(vote_head.second.weight.grad().norm() > 0.0);
  CHECK(class_head.second.weight.grad().norm() > 0.0);
}

TEST_CASE("classification path is deterministic") {
  Rng rng(8);
  nn::ParamStore store;
  const nn::MlpHead vote_head(store, "vote", 6, 3, 3, rng);
  const nn::MlpHead class_head(store, "cls", 6, 3, 3, rng);
  const Tensor feats(random_matrix(rng, 12, 6));
  const auto frames = random_frames(12, rng);
  auto once = [&] {
    const VoteSet v = predict_votes(feats, frames, vote_head);
    return classify_clusters(cluster_votes(v.positions, 5, 1.0), feats, class_head).predictions;
  };
  const auto a = once(), b = once();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].members == b[i].members);
    CHECK(a[i].logits == b[i].logits);
    CHECK(a[i].confidence == b[i].confidence);
  }
}

TEST_CASE("normalized vote loss divides by each object's squared radius") {
  Rng rng(9);
  const Matrix v = random_matrix(rng, 5, 3);
  const std::vector<double> radii{2.0, 0.5};
  double expected = 0.0;
  for (Index r = 0; r < 5; ++r) expected += v.row(r).squaredNorm() / (r < 2 ? 4.0 : 0.25);
  CHECK(normalized_vote_loss(Tensor(v), {0, 2, 5}, radii).value()(0, 0) == doctest::Approx(expected / 5.0));
  CHECK(normalized_vote_loss(Tensor(v), {0, 5}, {1.0}).value()(0, 0) ==
        doctest::Approx(vote_loss(Tensor(v)).value()(0, 0)));
  CHECK_THROWS(normalized_vote_loss(Tensor(v), {0, 2, 4}, radii));
  CHECK_THROWS(normalized_vote_loss(Tensor(v), {0, 5}, {0.0}));
}
