#include "skp/nn/tensor.hpp"

#include <unordered_set>

namespace skp::nn {

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->shape = {static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requires_grad);
}

Tensor& Tensor::reshape_logical(std::vector<std::size_t> shape) {
  std::size_t count = 1;
  for (std::size_t d : shape) count *= d;
  if (count != static_cast<std::size_t>(node_->value.size())) {
    throw ShapeError("reshape_logical: element count mismatch");
  }
  node_->shape = std::move(shape);
  return *this;
}

Scalar Tensor::item() const {
  if (node_->value.size() != 1) throw ShapeError("item(): tensor is not a scalar");
  return node_->value(0, 0);
}

Tensor Tensor::make(Matrix value, std::vector<Tensor> parents,
                    std::function<void(detail::Node&)> backward) {
  Tensor out(std::move(value), false);
  for (const Tensor& p : parents) {
    if (p.node_->requires_grad) out.node_->requires_grad = true;
  }
  if (out.node_->requires_grad) {
    out.node_->parents.reserve(parents.size());
    for (Tensor& p : parents) out.node_->parents.push_back(std::move(p.node_));
    out.node_->backward = std::move(backward);
  }
  return out;
}

void Tensor::backward() const {
  if (node_->value.size() != 1) throw ShapeError("backward(): root must be a scalar");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the tracked graph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

void Tensor::zero_grad() { node_->grad.resize(0, 0); }

}  // namespace skp::nn
