#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace skp::nn {

/// Training and gradient checks share one precision. Central differences at
/// h = 1e-4 need the headroom of 64-bit floats.
using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient reaches this node
  std::vector<std::size_t> shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

/// Handle to a node of the computation graph.
///
/// Storage is a dense row-major matrix. Higher-rank tensors such as the
/// [P, N, F] per-point features are laid out as (P*N) x F; `shape()` keeps
/// the logical dimensions. Copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor scalar(Scalar v, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
  [[nodiscard]] const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  [[nodiscard]] const Matrix& grad() const { return node_->grad; }
  [[nodiscard]] bool has_grad() const { return node_->grad.size() != 0; }
  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  [[nodiscard]] Index rows() const { return node_->value.rows(); }
  [[nodiscard]] Index cols() const { return node_->value.cols(); }
  [[nodiscard]] const std::vector<std::size_t>& shape() const { return node_->shape; }
  Tensor& reshape_logical(std::vector<std::size_t> shape);
  [[nodiscard]] Scalar item() const;

  /// Reverse-mode sweep from this scalar. Gradients accumulate into every
  /// reachable node that requires them.
  void backward() const;
  void zero_grad();

  /// Builds a result node. `backward` receives the result node and pushes
  /// its gradient into the parents; it is dropped when no parent tracks
  /// gradients.
  static Tensor make(Matrix value, std::vector<Tensor> parents,
                     std::function<void(detail::Node&)> backward);

  [[nodiscard]] detail::Node& node() const { return *node_; }
  [[nodiscard]] detail::Node& parent(std::size_t i) const { return *node_->parents[i]; }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.node_ == b.node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

}  // namespace skp::nn
