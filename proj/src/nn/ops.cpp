#include "skp/nn/ops.hpp"

#include <cmath>
#include <string>

namespace skp::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return Tensor::make(std::move(out), {a, b}, [](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * self.grad);
  });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.cols() == w.rows(), "affine: x columns != W rows");
  require(b.rows() == 1 && b.cols() == w.cols(), "affine: bias must be [1, Fout]");
  Matrix out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return Tensor::make(std::move(out), {x, w, b}, [](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pw = *self.parents[1];
    detail::Node& pb = *self.parents[2];
    if (px.requires_grad) px.accumulate(self.grad * pw.value.transpose());
    if (pw.requires_grad) pw.accumulate(px.value.transpose() * self.grad);
    if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
  });
}

Tensor relu(const Tensor& x) {
  Matrix out = x.value().cwiseMax(Scalar(0));
  return Tensor::make(std::move(out), {x}, [](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    px.accumulate(Matrix((px.value.array() > Scalar(0)).select(self.grad.array(), Scalar(0))));
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix out = a.value() + b.value();
  return Tensor::make(std::move(out), {a, b}, [](detail::Node& self) {
    self.parents[0]->accumulate(self.grad);
    self.parents[1]->accumulate(self.grad);
  });
}

Tensor scale(const Tensor& x, Scalar s) {
  Matrix out = s * x.value();
  return Tensor::make(std::move(out), {x}, [s](detail::Node& self) {
    self.parents[0]->accumulate(s * self.grad);
  });
}

Tensor group_max(const Tensor& x, Index group) {
  require(group > 0 && x.rows() % group == 0, "group_max: rows not divisible by group");
  const Index groups = x.rows() / group;
  const Index cols = x.cols();
  Matrix out(groups, cols);
  std::vector<Index> argmax(static_cast<std::size_t>(groups * cols));
  const Matrix& v = x.value();
  for (Index g = 0; g < groups; ++g) {
    for (Index c = 0; c < cols; ++c) {
      Index best = g * group;
      for (Index r = g * group + 1; r < (g + 1) * group; ++r) {
        if (v(r, c) > v(best, c)) best = r;
      }
      out(g, c) = v(best, c);
      argmax[static_cast<std::size_t>(g * cols + c)] = best;
    }
  }
  return Tensor::make(std::move(out), {x}, [argmax = std::move(argmax)](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    const Index cols = self.grad.cols();
    for (Index gr = 0; gr < self.grad.rows(); ++gr) {
      for (Index c = 0; c < cols; ++c) {
        g(argmax[static_cast<std::size_t>(gr * cols + c)], c) += self.grad(gr, c);
      }
    }
    px.accumulate(g);
  });
}

Tensor max_subtract(const Tensor& x, const Tensor& lambda, Index group) {
  require(lambda.rows() == 1 && lambda.cols() == 1, "max_subtract: lambda must be 1x1");
  require(group > 0 && x.rows() % group == 0, "max_subtract: rows not divisible by group");
  const Index groups = x.rows() / group;
  const Index cols = x.cols();
  const Matrix& v = x.value();
  const Scalar lam = lambda.value()(0, 0);
  Matrix maxima(groups, cols);
  std::vector<Index> argmax(static_cast<std::size_t>(groups * cols));
  for (Index g = 0; g < groups; ++g) {
    for (Index c = 0; c < cols; ++c) {
      Index best = g * group;
      for (Index r = g * group + 1; r < (g + 1) * group; ++r) {
        if (v(r, c) > v(best, c)) best = r;
      }
      maxima(g, c) = v(best, c);
      argmax[static_cast<std::size_t>(g * cols + c)] = best;
    }
  }
  Matrix out = v;
  for (Index g = 0; g < groups; ++g) {
    out.middleRows(g * group, group).rowwise() -= lam * maxima.row(g);
  }
  return Tensor::make(std::move(out), {x, lambda},
                      [group, maxima = std::move(maxima), argmax = std::move(argmax)](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pl = *self.parents[1];
    const Scalar lam = pl.value(0, 0);
    const Index groups = maxima.rows();
    const Index cols = maxima.cols();
    Matrix group_sums(groups, cols);
    for (Index g = 0; g < groups; ++g) {
      group_sums.row(g) = self.grad.middleRows(g * group, group).colwise().sum();
    }
    if (px.requires_grad) {
      Matrix gx = self.grad;
      for (Index g = 0; g < groups; ++g) {
        for (Index c = 0; c < cols; ++c) {
          gx(argmax[static_cast<std::size_t>(g * cols + c)], c) -= lam * group_sums(g, c);
        }
      }
      px.accumulate(gx);
    }
    if (pl.requires_grad) {
      Matrix gl(1, 1);
      gl(0, 0) = -(group_sums.array() * maxima.array()).sum();
      pl.accumulate(gl);
    }
  });
}

Tensor gather_max(const Tensor& x, const std::vector<std::vector<std::size_t>>& groups) {
  const Index cols = x.cols();
  const Matrix& v = x.value();
  Matrix out(static_cast<Index>(groups.size()), cols);
  std::vector<Index> argmax(groups.size() * static_cast<std::size_t>(cols));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    require(!groups[g].empty(), "gather_max: empty group");
    for (std::size_t r : groups[g]) require(static_cast<Index>(r) < x.rows(), "gather_max: row out of range");
    for (Index c = 0; c < cols; ++c) {
      Index best = static_cast<Index>(groups[g][0]);
      for (std::size_t r : groups[g]) {
        if (v(static_cast<Index>(r), c) > v(best, c)) best = static_cast<Index>(r);
      }
      out(static_cast<Index>(g), c) = v(best, c);
      argmax[g * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)] = best;
    }
  }
  return Tensor::make(std::move(out), {x}, [argmax = std::move(argmax)](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    const Index cols = self.grad.cols();
    for (Index gr = 0; gr < self.grad.rows(); ++gr) {
      for (Index c = 0; c < cols; ++c) {
        g(argmax[static_cast<std::size_t>(gr * cols + c)], c) += self.grad(gr, c);
      }
    }
    px.accumulate(g);
  });
}

Tensor select_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(static_cast<Index>(rows[i]) < x.rows(), "select_rows: row out of range");
    out.row(static_cast<Index>(i)) = x.value().row(static_cast<Index>(rows[i]));
  }
  return Tensor::make(std::move(out), {x}, [rows](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      g.row(static_cast<Index>(rows[i])) += self.grad.row(static_cast<Index>(i));
    }
    px.accumulate(g);
  });
}

Tensor sparse_matmul(const SparseMatrix& h, const Tensor& x) {
  require(h.cols() == x.rows(), "sparse_matmul: inner dimensions differ");
  Matrix out = h * x.value();
  return Tensor::make(std::move(out), {x}, [h](detail::Node& self) {
    self.parents[0]->accumulate(h.transpose() * self.grad);
  });
}

Tensor reshape(const Tensor& x, Index rows, Index cols) {
  require(rows * cols == x.value().size(), "reshape: element count mismatch");
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  return Tensor::make(std::move(out), {x}, [](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    px.accumulate(Eigen::Map<const Matrix>(self.grad.data(), px.value.rows(), px.value.cols()));
  });
}

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps,
                        RowVector* mean_out, RowVector* var_out) {
  require(x.rows() >= 2, "batch_norm: batch-too-small (need >= 2 rows in training mode)");
  require(gamma.rows() == 1 && gamma.cols() == x.cols(), "batch_norm: gamma must be [1, C]");
  require(beta.rows() == 1 && beta.cols() == x.cols(), "batch_norm: beta must be [1, C]");
  const Scalar n = static_cast<Scalar>(x.rows());
  const RowVector mean = x.value().colwise().mean();
  const Matrix centered = x.value().rowwise() - mean;
  const RowVector var = centered.array().square().colwise().sum() / n;
  const RowVector inv_std = (var.array() + eps).rsqrt();
  Matrix xhat = centered.array().rowwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  if (mean_out) *mean_out = mean;
  if (var_out) *var_out = var;
  return Tensor::make(std::move(out), {x, gamma, beta},
                      [xhat = std::move(xhat), inv_std](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pg = *self.parents[1];
    detail::Node& pb = *self.parents[2];
    const Matrix& dy = self.grad;
    const RowVector sum_dy = dy.colwise().sum();
    const RowVector sum_dy_xhat = (dy.array() * xhat.array()).colwise().sum();
    if (pg.requires_grad) pg.accumulate(sum_dy_xhat);
    if (pb.requires_grad) pb.accumulate(sum_dy);
    if (px.requires_grad) {
      const Scalar n = static_cast<Scalar>(dy.rows());
      const RowVector coef = pg.value.row(0).array() * inv_std.array() / n;
      Matrix dx = (n * dy).rowwise() - sum_dy;
      dx -= (xhat.array().rowwise() * sum_dy_xhat.array()).matrix();
      dx = dx.array().rowwise() * coef.array();
      px.accumulate(dx);
    }
  });
}

Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const RowVector& mean, const RowVector& var, Scalar eps) {
  require(gamma.cols() == x.cols() && beta.cols() == x.cols(), "batch_norm: channel mismatch");
  require(mean.cols() == x.cols() && var.cols() == x.cols(), "batch_norm: running stats mismatch");
  const RowVector inv_std = (var.array() + eps).rsqrt();
  Matrix xhat = (x.value().rowwise() - mean).array().rowwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return Tensor::make(std::move(out), {x, gamma, beta},
                      [xhat = std::move(xhat), inv_std](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pg = *self.parents[1];
    detail::Node& pb = *self.parents[2];
    if (pg.requires_grad) pg.accumulate(RowVector((self.grad.array() * xhat.array()).colwise().sum()));
    if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
    if (px.requires_grad) {
      const RowVector coef = pg.value.row(0).array() * inv_std.array();
      px.accumulate((self.grad.array().rowwise() * coef.array()).matrix());
    }
  });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p = p.array().colwise() / p.rowwise().sum().array();
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  require(static_cast<Index>(labels.size()) == logits.rows(), "softmax_cross_entropy: label count != rows");
  require(logits.rows() > 0, "softmax_cross_entropy: empty batch");
  const Index b = logits.rows();
  const Index c = logits.cols();
  for (std::size_t l : labels) {
    if (static_cast<Index>(l) >= c) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(l) + " out of range");
    }
  }
  const Matrix& z = logits.value();
  Matrix shifted = z.colwise() - z.rowwise().maxCoeff();
  const auto log_norm = shifted.array().exp().rowwise().sum().log().eval();
  Scalar loss = 0;
  for (Index r = 0; r < b; ++r) loss += log_norm(r) - shifted(r, static_cast<Index>(labels[static_cast<std::size_t>(r)]));
  loss /= static_cast<Scalar>(b);
  Matrix out(1, 1);
  out(0, 0) = loss;
  return Tensor::make(std::move(out), {logits}, [labels](detail::Node& self) {
    detail::Node& pz = *self.parents[0];
    Matrix g = softmax_rows(pz.value);
    const Index rows = g.rows();
    for (Index r = 0; r < rows; ++r) g(r, static_cast<Index>(labels[static_cast<std::size_t>(r)])) -= 1;
    g *= self.grad(0, 0) / static_cast<Scalar>(rows);
    pz.accumulate(g);
  });
}

Tensor weighted_sum(const Tensor& x, const Matrix& w) {
  require(w.rows() == x.rows() && w.cols() == x.cols(), "weighted_sum: shape mismatch");
  Matrix out(1, 1);
  out(0, 0) = (x.value().array() * w.array()).sum();
  return Tensor::make(std::move(out), {x}, [w](detail::Node& self) {
    self.parents[0]->accumulate(self.grad(0, 0) * w);
  });
}

Tensor weighted_row_sqnorm(const Tensor& x, const std::vector<Scalar>& weights) {
  require(static_cast<Index>(weights.size()) == x.rows(), "weighted_row_sqnorm: weight count != rows");
  Scalar total = 0;
  for (Index r = 0; r < x.rows(); ++r) total += weights[static_cast<std::size_t>(r)] * x.value().row(r).squaredNorm();
  Matrix out(1, 1);
  out(0, 0) = total;
  return Tensor::make(std::move(out), {x}, [weights](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    Matrix g = px.value;
    for (Index r = 0; r < g.rows(); ++r) g.row(r) *= 2 * weights[static_cast<std::size_t>(r)] * self.grad(0, 0);
    px.accumulate(g);
  });
}

}  // namespace skp::nn
