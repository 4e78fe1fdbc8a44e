#pragma once

#include <cstddef>
#include <vector>

#include "skp/geometry/point_cloud.hpp"
#include "skp/nn/layers.hpp"
#include "skp/parts/part_graph.hpp"

namespace skp::voting {

struct VoteConfig {
  std::size_t num_clusters = 5;
  /// Cluster radius as a fraction of the input cloud's bounding radius.
  double radius_fraction = 0.25;
  /// Weight of the vote loss in the total loss.
  double lambda = 1.0;
  /// Divide each object's squared vote distances by its squared bounding
  /// radius, so objects of every scale weigh the same in the loss.
  bool normalize_by_radius = true;

  void validate() const;
};

/// What a part needs to turn a local offset into a global vote.
struct PartFrame {
  Vec3 center = Vec3::Zero();
  Mat3 lrf = Mat3::Identity();
  /// Length unit of the predicted offset: the part's bounding radius.
  double scale = 1.0;
};

std::vector<PartFrame> part_frames(const PartGraph& graph);

/// vote_i = R_i^T (scale_i * u_i) + center_i, differentiable in `raw`.
nn::Tensor cast_votes(const nn::Tensor& raw, const std::vector<PartFrame>& frames);

struct VoteSet {
  nn::Tensor votes;               // [N, 3], global frame
  std::vector<Vec3> offsets;      // local offsets delta_p_i (scaled)
  std::vector<Vec3> positions;    // vote values, for clustering
};

/// Runs the vote head on the part features and casts the votes.
VoteSet predict_votes(const nn::Tensor& part_feats, const std::vector<PartFrame>& frames,
                      const nn::MlpHead& head);

/// Mean squared distance of the votes to the origin.
nn::Tensor vote_loss(const nn::Tensor& votes);

/// Mean over all rows of ||vote||^2 / radius^2, where rows [offsets[b],
/// offsets[b+1]) belong to an object of bounding radius radii[b].
nn::Tensor normalized_vote_loss(const nn::Tensor& votes, const std::vector<std::size_t>& offsets,
                                const std::vector<double>& radii);

struct Cluster {
  std::size_t center_part = 0;
  Vec3 center = Vec3::Zero();
  std::vector<std::size_t> members;  // ascending part indices
};

/// Farthest point sampling over the votes (seeded at part 0) picks
/// min(num_clusters, N) centers; each cluster holds every part whose vote is
/// within `radius` of its center.
std::vector<Cluster> cluster_votes(const std::vector<Vec3>& votes, std::size_t num_clusters,
                                   double radius);

struct ClusterPrediction {
  Vec3 center = Vec3::Zero();
  std::vector<std::size_t> members;
  Eigen::VectorXd logits;
  double confidence = 0.0;  // max softmax probability
  std::size_t predicted_class = 0;
};

struct ClusterScores {
  nn::Tensor logits;  // [clusters, classes]
  std::vector<ClusterPrediction> predictions;
};

/// Max-pools member features per cluster and classifies each aggregate.
/// `row_offset` is added to member indices when the features of several
/// objects are stacked.
ClusterScores classify_clusters(const std::vector<Cluster>& clusters, const nn::Tensor& part_feats,
                                const nn::MlpHead& head, std::size_t row_offset = 0);

/// Index of the most confident cluster, lowest index on ties.
std::size_t select_prediction(const std::vector<ClusterPrediction>& clusters);

/// class_loss + lambda * vote_loss.
nn::Tensor total_loss(const nn::Tensor& class_loss, const nn::Tensor& vote_loss, double lambda);

}  // namespace skp::voting
