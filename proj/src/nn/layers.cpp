#include "skp/nn/layers.hpp"

#include <cmath>

namespace skp::nn {

Linear::Linear(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng) {
  const Scalar bound = std::sqrt(Scalar(6) / static_cast<Scalar>(in));
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  weight = store.add(name + ".weight", std::move(w));
  bias = store.add(name + ".bias", Matrix::Zero(1, out));
}

BatchNorm::BatchNorm(ParamStore& store, const std::string& name, Index channels, Scalar momentum_,
                     Scalar eps_)
    : momentum(momentum_), eps(eps_) {
  gamma = store.add(name + ".gamma", Matrix::Ones(1, channels));
  beta = store.add(name + ".beta", Matrix::Zero(1, channels));
  running_mean = store.add(name + ".running_mean", Matrix::Zero(1, channels), false);
  running_var = store.add(name + ".running_var", Matrix::Ones(1, channels), false);
}

Tensor BatchNorm::operator()(const Tensor& x, bool training) const {
  if (!training) {
    return batch_norm_infer(x, gamma, beta, running_mean.value().row(0), running_var.value().row(0), eps);
  }
  RowVector mean;
  RowVector var;
  Tensor out = batch_norm_train(x, gamma, beta, eps, &mean, &var);
  const Scalar n = static_cast<Scalar>(x.rows());
  const RowVector unbiased = var * (n / (n - 1));
  Tensor rm = running_mean;
  Tensor rv = running_var;
  rm.mutable_value() = (1 - momentum) * rm.value() + momentum * mean;
  rv.mutable_value() = (1 - momentum) * rv.value() + momentum * unbiased;
  return out;
}

MaxSubPointLayer::MaxSubPointLayer(ParamStore& store, const std::string& name, Index in, Index out,
                                   Rng& rng, Scalar lambda_init)
    : linear(store, name + ".linear", in, out, rng) {
  lambda = store.add(name + ".lambda", Matrix::Constant(1, 1, lambda_init));
}

Tensor MaxSubPointLayer::operator()(const Tensor& x, Index set_size) const {
  return linear(max_subtract(x, lambda, set_size));
}

PartEncoder::PartEncoder(ParamStore& store, const std::string& name, const EncoderConfig& cfg,
                         Rng& rng) {
  Index in = 3;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const std::string prefix = name + "." + std::to_string(i);
    layers.emplace_back(store, prefix, in, cfg.widths[i], rng);
    norms.emplace_back(store, prefix + ".bn", cfg.widths[i]);
    in = cfg.widths[i];
  }
}

Tensor PartEncoder::operator()(const Tensor& points, Index points_per_part, bool training) const {
  Tensor h = points;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = relu(norms[i](layers[i](h, points_per_part), training));
  }
  return group_max(h, points_per_part);
}

Index PartEncoder::out_features() const {
  return layers.empty() ? 3 : layers.back().linear.out_features();
}

MlpHead::MlpHead(ParamStore& store, const std::string& name, Index in, Index hidden, Index out,
                 Rng& rng)
    : first(store, name + ".0", in, hidden, rng), second(store, name + ".1", hidden, out, rng) {}

}  // namespace skp::nn
