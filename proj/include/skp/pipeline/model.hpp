#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "skp/conv/kernel_conv.hpp"
#include "skp/nn/layers.hpp"
#include "skp/parts/part_graph.hpp"
#include "skp/pipeline/config.hpp"
#include "skp/voting/voting.hpp"

namespace skp::pipeline {

/// An object reduced to what the network consumes.
struct PreparedObject {
  std::size_t id = 0;
  std::size_t label = 0;
  PartGraph graph;
  conv::GraphNeighborhood neighborhood;
  std::vector<voting::PartFrame> frames;
  /// Bounding radius of the input cloud; sets the vote cluster radius.
  double cloud_radius = 0.0;
  /// Per-part clutter flag: majority of members are injected clutter.
  std::vector<bool> clutter_parts;
};

/// Builds the part graph (with the config's grow/connect settings) and the
/// neighborhood the convolutions use. `clutter` may be empty.
PreparedObject prepare_object(const PointCloud& cloud, std::size_t label, std::size_t id,
                              const RunConfig& cfg, Rng& rng,
                              const std::vector<bool>& clutter = {});

struct ObjectPrediction {
  std::size_t predicted_class = 0;
  double confidence = 0.0;
  /// Selected cluster (votemaxpool) or all parts (maxpool).
  std::vector<std::size_t> members;
  std::vector<voting::ClusterPrediction> clusters;
  std::vector<Vec3> votes;
};

struct ForwardResult {
  nn::Tensor loss;        // total loss
  nn::Tensor class_loss;
  nn::Tensor vote_loss;   // undefined in maxpool mode
  std::vector<ObjectPrediction> predictions;
};

class Model {
 public:
  Model(const RunConfig& cfg, std::size_t num_classes);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// One forward pass over a batch of objects (their graphs are stacked).
  /// `with_loss` requires labels and builds the loss graph.
  [[nodiscard]] ForwardResult forward(const std::vector<const PreparedObject*>& batch, bool training,
                                      bool with_loss = true) const;

  /// Per-part features after the convolution stack, [sum of parts, F].
  [[nodiscard]] nn::Tensor part_features(const std::vector<const PreparedObject*>& batch,
                                         bool training) const;

  nn::ParamStore& params() { return store_; }
  [[nodiscard]] const nn::ParamStore& params() const { return store_; }
  [[nodiscard]] const RunConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t num_classes() const { return num_classes_; }
  [[nodiscard]] const conv::KernelLayout& layout() const { return layout_; }

  nn::PartEncoder encoder;
  std::vector<conv::KernelConvLayer> convs;
  nn::MlpHead vote_head;
  nn::MlpHead class_head;

 private:
  RunConfig cfg_;
  std::size_t num_classes_;
  nn::ParamStore store_;
  conv::KernelLayout layout_;
};

}  // namespace skp::pipeline
