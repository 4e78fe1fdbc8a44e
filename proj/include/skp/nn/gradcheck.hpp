#pragma once

#include <functional>
#include <string>
#include <vector>

#include "skp/nn/tensor.hpp"

namespace skp::nn {

struct GradCheckResult {
  /// Largest per-input relative error ||analytic - numeric|| / max(norms).
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  bool passed = true;
};

/// Compares reverse-mode gradients of a scalar loss against central finite
/// differences. `loss` must rebuild its graph from the current values of
/// `inputs` on every call; `inputs` are perturbed in place and restored.
GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                Scalar h = 1e-4, double tolerance = 1e-3);

}  // namespace skp::nn
