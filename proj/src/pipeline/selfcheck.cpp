#include "skp/pipeline/selfcheck.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "skp/nn/gradcheck.hpp"
#include "skp/pipeline/dataset.hpp"
#include "skp/pipeline/model.hpp"
#include "skp/pipeline/train.hpp"

namespace skp::pipeline {

namespace {

nn::Matrix random_matrix(Rng& rng, nn::Index r, nn::Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  nn::Matrix m(r, c);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

nn::Tensor param(Rng& rng, nn::Index r, nn::Index c) { return nn::Tensor(random_matrix(rng, r, c), true); }

/// Random weighting turns any output into a scalar with a generic gradient.
nn::Tensor reduce(const nn::Tensor& y, const nn::Matrix& w) { return nn::weighted_sum(y, w); }

conv::GraphNeighborhood random_graph(Rng& rng, std::size_t n) {
  conv::GraphNeighborhood g;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    g.centers.emplace_back(u(rng), u(rng), u(rng));
    g.rotations.push_back(rotation_about_z(3.0 * u(rng)));
    auto& list = g.neighbors.emplace_back();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) list.push_back(j);
    }
  }
  return g;
}

using Case = std::function<nn::GradCheckResult(Rng&)>;

CheckOutcome run_case(const std::string& name, std::size_t seeds, const Case& fn) {
  double worst = 0.0;
  bool ok = true;
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng = derive_rng(1000 + s, {static_cast<std::uint64_t>(name.size()), name.front() * 1ULL});
    const nn::GradCheckResult r = fn(rng);
    worst = std::max(worst, r.max_relative_error);
    ok = ok && r.passed;
  }
  std::ostringstream d;
  d << "max rel err " << worst << " over " << seeds << " seeds";
  return {name, ok, d.str()};
}

}  // namespace

std::vector<CheckOutcome> gradient_checks(std::size_t seeds) {
  std::vector<CheckOutcome> out;
  out.push_back(run_case("affine", seeds, [](Rng& rng) {
    auto x = param(rng, 3, 4), w = param(rng, 4, 2), b = param(rng, 1, 2);
    const nn::Matrix r = random_matrix(rng, 3, 2);
    return nn::check_gradients([&] { return reduce(nn::affine(x, w, b), r); }, {x, w, b});
  }));
  out.push_back(run_case("maxsub", seeds, [](Rng& rng) {
    auto x = param(rng, 8, 3), lambda = param(rng, 1, 1), w = param(rng, 3, 4), b = param(rng, 1, 4);
    const nn::Matrix r = random_matrix(rng, 8, 4);
    return nn::check_gradients(
        [&] { return reduce(nn::affine(nn::max_subtract(x, lambda, 4), w, b), r); }, {x, lambda, w, b});
  }));
  out.push_back(run_case("batch_norm", seeds, [](Rng& rng) {
    auto x = param(rng, 4, 3), gamma = param(rng, 1, 3), beta = param(rng, 1, 3);
    const nn::Matrix r = random_matrix(rng, 4, 3);
    return nn::check_gradients([&] { return reduce(nn::batch_norm_train(x, gamma, beta, 1e-5), r); },
                               {x, gamma, beta});
  }));
  out.push_back(run_case("softmax_ce", seeds, [](Rng& rng) {
    auto logits = param(rng, 5, 3);
    std::vector<std::size_t> labels;
    for (int i = 0; i < 5; ++i) labels.push_back(std::uniform_int_distribution<std::size_t>(0, 2)(rng));
    return nn::check_gradients([&] { return nn::softmax_cross_entropy(logits, labels); }, {logits});
  }));
  for (conv::ConvKind kind : {conv::ConvKind::kpconv, conv::ConvKind::skpconv}) {
    out.push_back(run_case(conv::to_string(kind), seeds, [kind](Rng& rng) {
      const auto g = random_graph(rng, 5);
      const auto layout = conv::make_kernel_layout(6, 1.2, true);
      const auto h = conv::influence_matrix(g, layout, kind, true);
      auto f = param(rng, 5, 3), w = param(rng, static_cast<nn::Index>(layout.size()) * 3, 2);
      const nn::Matrix r = random_matrix(rng, 5, 2);
      return nn::check_gradients(
          [&] { return reduce(conv::kernel_conv(f, h, w, static_cast<nn::Index>(layout.size())), r); }, {f, w});
    }));
  }
  out.push_back(run_case("vote_head", seeds, [](Rng& rng) {
    nn::ParamStore store;
    nn::MlpHead head(store, "v", 4, 2, 3, rng);
    std::vector<voting::PartFrame> frames;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 5; ++i) frames.push_back({Vec3(u(rng), u(rng), u(rng)), rotation_about_z(3 * u(rng)), 1.0 + u(rng) * 0.5});
    auto f = param(rng, 5, 4);
    std::vector<nn::Tensor> inputs{f};
    for (const auto& p : store.params()) inputs.push_back(p.tensor);
    return nn::check_gradients([&] { return voting::vote_loss(voting::cast_votes(head(f), frames)); }, inputs);
  }));
  out.push_back(run_case("cluster_classifier", seeds, [](Rng& rng) {
    nn::ParamStore store;
    nn::MlpHead head(store, "c", 4, 3, 3, rng);
    auto f = param(rng, 6, 4);
    const std::vector<std::vector<std::size_t>> groups{{0, 1, 2}, {3, 4}, {2, 5}};
    const std::vector<std::size_t> labels{0, 2, 1};
    std::vector<nn::Tensor> inputs{f};
    for (const auto& p : store.params()) inputs.push_back(p.tensor);
    return nn::check_gradients(
        [&] { return nn::softmax_cross_entropy(head(nn::gather_max(f, groups)), labels); }, inputs);
  }));
  return out;
}

std::vector<CheckOutcome> invariance_checks(const RunConfig& cfg, std::size_t objects) {
  const Dataset ds = synth_dataset(cfg.classes, (objects + cfg.classes.size() - 1) / cfg.classes.size(), 0,
                                   synth_options(cfg), cfg.seed);
  const Model model(cfg, ds.class_names.size());
  std::vector<const LabeledObject*> base;
  for (const LabeledObject& o : ds.objects) {
    if (base.size() < objects) base.push_back(&o);
  }
  const auto reference = predict(model, base, 7);

  std::vector<CheckOutcome> out;
  Rng rng = derive_rng(cfg.seed, {77});
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (const std::string kind : {"rotation", "scale"}) {
    std::vector<LabeledObject> moved;
    for (const LabeledObject* o : base) {
      LabeledObject m = *o;
      m.cloud = kind == std::string("rotation") ? transform(o->cloud, rotation_about_z(angle(rng)))
                                                : transform(o->cloud, Mat3::Identity(), moved.size() % 2 ? 10.0 : 0.1);
      moved.push_back(std::move(m));
    }
    std::vector<const LabeledObject*> ptrs;
    for (const auto& m : moved) ptrs.push_back(&m);
    const auto pred = predict(model, ptrs, 7);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) agree += pred[i] == reference[i] ? 1 : 0;
    out.push_back({"class_" + std::string(kind), agree == pred.size(),
                   std::to_string(agree) + "/" + std::to_string(pred.size()) + " agree"});
  }
  return out;
}

}  // namespace skp::pipeline
