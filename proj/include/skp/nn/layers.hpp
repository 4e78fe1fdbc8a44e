#pragma once

#include <string>
#include <vector>

#include "skp/geometry/sampling.hpp"
#include "skp/nn/ops.hpp"
#include "skp/nn/param_store.hpp"

namespace skp::nn {

/// He-uniform initialized dense layer.
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng);

  [[nodiscard]] Tensor operator()(const Tensor& x) const { return affine(x, weight, bias); }
  [[nodiscard]] Index in_features() const { return weight.rows(); }
  [[nodiscard]] Index out_features() const { return weight.cols(); }

  Tensor weight;  // [in, out]
  Tensor bias;    // [1, out]
};

/// Per-channel normalization; running statistics live in the store as
/// non-trainable buffers so they travel with checkpoints.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParamStore& store, const std::string& name, Index channels, Scalar momentum = 0.1,
            Scalar eps = 1e-5);

  /// Training mode uses batch statistics (needs >= 2 rows) and updates the
  /// running estimates; inference mode uses the running estimates only.
  [[nodiscard]] Tensor operator()(const Tensor& x, bool training) const;

  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  Scalar momentum = 0.1;
  Scalar eps = 1e-5;
};

/// Shared per-point affine map whose input has a learned multiple of the
/// per-set maximum removed: y = (x - lambda * max_N(x)) W + b.
class MaxSubPointLayer {
 public:
  MaxSubPointLayer() = default;
  MaxSubPointLayer(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng,
                   Scalar lambda_init = 0.5);

  /// `x` holds consecutive sets of `set_size` rows.
  [[nodiscard]] Tensor operator()(const Tensor& x, Index set_size) const;

  Linear linear;
  Tensor lambda;  // 1x1
};

struct EncoderConfig {
  std::vector<Index> widths{64, 128, 256};
};

/// Point-set encoder for canonicalized parts: max-subtraction layers with
/// batch norm and ReLU, then a max over each part's points.
class PartEncoder {
 public:
  PartEncoder() = default;
  PartEncoder(ParamStore& store, const std::string& name, const EncoderConfig& cfg, Rng& rng);

  /// `points` is [P*N, 3]; returns [P, widths.back()].
  [[nodiscard]] Tensor operator()(const Tensor& points, Index points_per_part, bool training) const;
  [[nodiscard]] Index out_features() const;

  std::vector<MaxSubPointLayer> layers;
  std::vector<BatchNorm> norms;
};

/// Two-layer head: Linear -> ReLU -> Linear.
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(ParamStore& store, const std::string& name, Index in, Index hidden, Index out, Rng& rng);

  [[nodiscard]] Tensor operator()(const Tensor& x) const { return second(relu(first(x))); }

  Linear first;
  Linear second;
};

}  // namespace skp::nn
