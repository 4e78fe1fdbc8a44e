#include "skp/voting/voting.hpp"

#include <stdexcept>

#include "skp/geometry/sampling.hpp"

namespace skp::voting {

void VoteConfig::validate() const {
  if (num_clusters < 1) throw std::invalid_argument("vote: num_clusters must be >= 1");
  if (!(radius_fraction > 0.0)) throw std::invalid_argument("vote: radius_fraction must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("vote: lambda must be >= 0");
}

std::vector<PartFrame> part_frames(const PartGraph& graph) {
  std::vector<PartFrame> frames;
  frames.reserve(graph.parts.size());
  for (const Part& p : graph.parts) frames.push_back({p.center, p.lrf, p.bounding_radius});
  return frames;
}

nn::Tensor cast_votes(const nn::Tensor& raw, const std::vector<PartFrame>& frames) {
  if (raw.cols() != 3 || static_cast<std::size_t>(raw.rows()) != frames.size()) {
    throw nn::ShapeError("cast_votes: expected [N, 3] offsets for N parts");
  }
  nn::Matrix out(raw.rows(), 3);
  for (nn::Index i = 0; i < raw.rows(); ++i) {
    const PartFrame& f = frames[static_cast<std::size_t>(i)];
    const Vec3 u = raw.value().row(i).transpose();
    out.row(i) = (f.lrf.transpose() * (f.scale * u) + f.center).transpose();
  }
  return nn::Tensor::make(std::move(out), {raw}, [frames](nn::detail::Node& self) {
    nn::Matrix g(self.grad.rows(), 3);
    for (nn::Index i = 0; i < g.rows(); ++i) {
      const PartFrame& f = frames[static_cast<std::size_t>(i)];
      const Vec3 dv = self.grad.row(i).transpose();
      g.row(i) = (f.scale * (f.lrf * dv)).transpose();
    }
    self.parents[0]->accumulate(g);
  });
}

VoteSet predict_votes(const nn::Tensor& part_feats, const std::vector<PartFrame>& frames,
                      const nn::MlpHead& head) {
  VoteSet set;
  const nn::Tensor raw = head(part_feats);
  set.votes = cast_votes(raw, frames);
  for (nn::Index i = 0; i < raw.rows(); ++i) {
    const PartFrame& f = frames[static_cast<std::size_t>(i)];
    set.offsets.push_back(f.scale * raw.value().row(i).transpose());
    set.positions.push_back(set.votes.value().row(i).transpose());
  }
  return set;
}

nn::Tensor vote_loss(const nn::Tensor& votes) {
  const auto n = static_cast<std::size_t>(votes.rows());
  if (n == 0) throw nn::ShapeError("vote_loss: no votes");
  return nn::weighted_row_sqnorm(votes, std::vector<nn::Scalar>(n, nn::Scalar(1) / static_cast<nn::Scalar>(n)));
}

nn::Tensor normalized_vote_loss(const nn::Tensor& votes, const std::vector<std::size_t>& offsets,
                                const std::vector<double>& radii) {
  const auto n = static_cast<std::size_t>(votes.rows());
  if (n == 0) throw nn::ShapeError("vote_loss: no votes");
  if (offsets.size() != radii.size() + 1 || offsets.back() != n) {
    throw nn::ShapeError("vote_loss: object offsets do not cover the votes");
  }
  std::vector<nn::Scalar> weights(n);
  for (std::size_t b = 0; b < radii.size(); ++b) {
    if (!(radii[b] > 0.0)) throw std::invalid_argument("vote_loss: object radius must be > 0");
    for (std::size_t i = offsets[b]; i < offsets[b + 1]; ++i) {
      weights[i] = nn::Scalar(1) / (static_cast<nn::Scalar>(n) * radii[b] * radii[b]);
    }
  }
  return nn::weighted_row_sqnorm(votes, weights);
}

std::vector<Cluster> cluster_votes(const std::vector<Vec3>& votes, std::size_t num_clusters,
                                   double radius) {
  if (votes.empty()) throw std::invalid_argument("cluster_votes: no votes");
  const std::size_t m = std::min(num_clusters, votes.size());
  const auto centers = farthest_point_sampling(votes, m, 0);
  const double r2 = radius * radius;
  std::vector<Cluster> clusters;
  clusters.reserve(m);
  for (std::size_t c : centers) {
    Cluster cl;
    cl.center_part = c;
    cl.center = votes[c];
    for (std::size_t i = 0; i < votes.size(); ++i) {
      if ((votes[i] - cl.center).squaredNorm() <= r2) cl.members.push_back(i);
    }
    clusters.push_back(std::move(cl));
  }
  return clusters;
}

ClusterScores classify_clusters(const std::vector<Cluster>& clusters, const nn::Tensor& part_feats,
                                const nn::MlpHead& head, std::size_t row_offset) {
  if (clusters.empty()) throw std::invalid_argument("classify_clusters: no clusters");
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(clusters.size());
  for (const Cluster& c : clusters) {
    if (c.members.empty()) throw std::logic_error("classify_clusters: cluster without members");
    auto& g = groups.emplace_back();
    for (std::size_t m : c.members) g.push_back(m + row_offset);
  }
  ClusterScores scores;
  scores.logits = head(nn::gather_max(part_feats, groups));
  const nn::Matrix probs = nn::softmax_rows(scores.logits.value());
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    ClusterPrediction p;
    p.center = clusters[i].center;
    p.members = clusters[i].members;
    p.logits = scores.logits.value().row(static_cast<nn::Index>(i)).transpose();
    nn::Index arg = 0;
    p.confidence = probs.row(static_cast<nn::Index>(i)).maxCoeff(&arg);
    p.predicted_class = static_cast<std::size_t>(arg);
    scores.predictions.push_back(std::move(p));
  }
  return scores;
}

std::size_t select_prediction(const std::vector<ClusterPrediction>& clusters) {
  if (clusters.empty()) throw std::invalid_argument("select_prediction: no clusters");
  std::size_t best = 0;
  for (std::size_t i = 1; i < clusters.size(); ++i) {
    if (clusters[i].confidence > clusters[best].confidence) best = i;
  }
  return best;
}

nn::Tensor total_loss(const nn::Tensor& class_loss, const nn::Tensor& vote_loss, double lambda) {
  return nn::add(class_loss, nn::scale(vote_loss, static_cast<nn::Scalar>(lambda)));
}

}  // namespace skp::voting
