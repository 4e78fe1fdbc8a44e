#include "skp/nn/gradcheck.hpp"

#include <algorithm>

namespace skp::nn {

GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                Scalar h, double tolerance) {
  for (Tensor& t : inputs) t.zero_grad();
  loss().backward();

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& t = inputs[k];
    const Matrix analytic = t.has_grad() ? t.grad() : Matrix::Zero(t.rows(), t.cols());
    Matrix numeric(t.rows(), t.cols());
    Scalar* data = t.mutable_value().data();
    for (Index i = 0; i < t.value().size(); ++i) {
      const Scalar saved = data[i];
      data[i] = saved + h;
      const Scalar up = loss().item();
      data[i] = saved - h;
      const Scalar down = loss().item();
      data[i] = saved;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    const double scale = std::max(analytic.norm(), numeric.norm());
    const double err = scale > 1e-12 ? (analytic - numeric).norm() / scale : 0.0;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_input = k;
    }
  }
  for (Tensor& t : inputs) t.zero_grad();
  result.passed = result.max_relative_error <= tolerance;
  return result;
}

}  // namespace skp::nn
