#include "skp/pipeline/model.hpp"

#include <stdexcept>
#include <string>

namespace skp::pipeline {

namespace {
constexpr std::uint64_t kInitTag = 21;
}

PreparedObject prepare_object(const PointCloud& cloud, std::size_t label, std::size_t id,
                              const RunConfig& cfg, Rng& rng, const std::vector<bool>& clutter) {
  PreparedObject obj;
  obj.id = id;
  obj.label = label;
  obj.graph = build_part_graph(cloud, cfg.grow, cfg.connect, rng);
  obj.neighborhood = conv::make_neighborhood(obj.graph, cfg.use_lrf);
  obj.frames = voting::part_frames(obj.graph);
  obj.cloud_radius = bounding_radius(cloud.positions);
  if (!clutter.empty()) {
    for (const Part& p : obj.graph.parts) {
      std::size_t n = 0;
      for (std::size_t m : p.members) n += clutter[m] ? 1 : 0;
      obj.clutter_parts.push_back(2 * n > p.members.size());
    }
  }
  return obj;
}

Model::Model(const RunConfig& cfg, std::size_t num_classes) : cfg_(cfg), num_classes_(num_classes) {
  cfg_.validate();
  if (num_classes < 2) throw ConfigError("model: need at least 2 classes");
  Rng rng = derive_rng(cfg.seed, {kInitTag});
  encoder = nn::PartEncoder(store_, "encoder", nn::EncoderConfig{cfg.encoder_widths}, rng);
  layout_ = conv::make_kernel_layout(cfg.kernel_sphere_count, cfg.kernel_sigma, cfg.kernel_origin);
  nn::Index in = encoder.out_features();
  for (std::size_t i = 0; i < cfg.conv_widths.size(); ++i) {
    convs.emplace_back(store_, "conv" + std::to_string(i), in, cfg.conv_widths[i], layout_.size(), rng);
    in = cfg.conv_widths[i];
  }
  const nn::Index hidden = std::max<nn::Index>(1, in / 2);
  vote_head = nn::MlpHead(store_, "vote_head", in, hidden, 3, rng);
  class_head = nn::MlpHead(store_, "class_head", in, hidden, static_cast<nn::Index>(num_classes), rng);
}

nn::Tensor Model::part_features(const std::vector<const PreparedObject*>& batch, bool training) const {
  if (batch.empty()) throw std::invalid_argument("model: empty batch");
  const auto n = static_cast<nn::Index>(cfg_.grow.points_per_part);
  nn::Index total = 0;
  for (const PreparedObject* o : batch) total += static_cast<nn::Index>(o->graph.parts.size());
  nn::Matrix pts(total * n, 3);
  nn::Index row = 0;
  std::vector<const conv::GraphNeighborhood*> hoods;
  for (const PreparedObject* o : batch) {
    hoods.push_back(&o->neighborhood);
    for (const Part& p : o->graph.parts) {
      if (static_cast<nn::Index>(p.canonical_points.size()) != n) {
        throw nn::ShapeError("model: part has " + std::to_string(p.canonical_points.size()) +
                             " canonical points, expected " + std::to_string(n));
      }
      for (const Vec3& q : p.canonical_points) pts.row(row++) = q.transpose();
    }
  }
  nn::Tensor h = encoder(nn::Tensor(std::move(pts)), n, training);
  const nn::SparseMatrix influence =
      conv::influence_matrix(conv::concatenate(hoods), layout_, cfg_.layer, cfg_.self_loop);
  for (const conv::KernelConvLayer& layer : convs) h = layer(h, influence, training);
  return h;
}

ForwardResult Model::forward(const std::vector<const PreparedObject*>& batch, bool training,
                             bool with_loss) const {
  const nn::Tensor feats = part_features(batch, training);
  ForwardResult out;
  out.predictions.resize(batch.size());
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const PreparedObject* o : batch) {
    offsets.push_back(total);
    total += o->graph.parts.size();
  }
  std::vector<std::size_t> labels;
  for (const PreparedObject* o : batch) labels.push_back(o->label);

  nn::Tensor logits;
  if (cfg_.pooling == Pooling::maxpool) {
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      auto& g = groups.emplace_back();
      for (std::size_t i = 0; i < batch[b]->graph.parts.size(); ++i) g.push_back(offsets[b] + i);
    }
    logits = class_head(nn::gather_max(feats, groups));
    const nn::Matrix probs = nn::softmax_rows(logits.value());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      ObjectPrediction& p = out.predictions[b];
      nn::Index arg = 0;
      p.confidence = probs.row(static_cast<nn::Index>(b)).maxCoeff(&arg);
      p.predicted_class = static_cast<std::size_t>(arg);
      for (std::size_t i = 0; i < batch[b]->graph.parts.size(); ++i) p.members.push_back(i);
    }
  } else {
    std::vector<voting::PartFrame> frames;
    for (const PreparedObject* o : batch) frames.insert(frames.end(), o->frames.begin(), o->frames.end());
    const voting::VoteSet votes = voting::predict_votes(feats, frames, vote_head);

    std::vector<voting::Cluster> all;
    std::vector<std::size_t> first_cluster;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const std::size_t parts = batch[b]->graph.parts.size();
      std::vector<Vec3> local(votes.positions.begin() + static_cast<std::ptrdiff_t>(offsets[b]),
                              votes.positions.begin() + static_cast<std::ptrdiff_t>(offsets[b] + parts));
      auto clusters = voting::cluster_votes(local, cfg_.vote.num_clusters,
                                            cfg_.vote.radius_fraction * batch[b]->cloud_radius);
      first_cluster.push_back(all.size());
      for (voting::Cluster& c : clusters) {
        for (std::size_t& m : c.members) m += offsets[b];
        c.center_part += offsets[b];
        all.push_back(std::move(c));
      }
      out.predictions[b].votes = std::move(local);
    }
    first_cluster.push_back(all.size());

    const voting::ClusterScores scores = voting::classify_clusters(all, feats, class_head, 0);
    std::vector<std::size_t> chosen;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      ObjectPrediction& p = out.predictions[b];
      p.clusters.assign(scores.predictions.begin() + static_cast<std::ptrdiff_t>(first_cluster[b]),
                        scores.predictions.begin() + static_cast<std::ptrdiff_t>(first_cluster[b + 1]));
      for (auto& c : p.clusters) {
        for (std::size_t& m : c.members) m -= offsets[b];
      }
      const std::size_t sel = voting::select_prediction(p.clusters);
      chosen.push_back(first_cluster[b] + sel);
      p.predicted_class = p.clusters[sel].predicted_class;
      p.confidence = p.clusters[sel].confidence;
      p.members = p.clusters[sel].members;
    }
    if (with_loss) {
      logits = nn::select_rows(scores.logits, chosen);
      if (cfg_.vote.normalize_by_radius) {
        std::vector<std::size_t> bounds = offsets;
        bounds.push_back(total);
        std::vector<double> radii;
        for (const PreparedObject* o : batch) radii.push_back(o->cloud_radius);
        out.vote_loss = voting::normalized_vote_loss(votes.votes, bounds, radii);
      } else {
        out.vote_loss = voting::vote_loss(votes.votes);
      }
    }
  }

  if (with_loss) {
    out.class_loss = nn::softmax_cross_entropy(logits, labels);
    out.loss = out.vote_loss.defined()
                   ? voting::total_loss(out.class_loss, out.vote_loss, cfg_.vote.lambda)
                   : out.class_loss;
  }
  return out;
}

}  // namespace skp::pipeline
