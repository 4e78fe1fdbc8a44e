#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/SparseCore>

#include "skp/nn/tensor.hpp"

namespace skp::nn {

using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

Tensor matmul(const Tensor& a, const Tensor& b);

/// y = x W + b with b broadcast over rows. W is [Fin, Fout], b is [1, Fout].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Scalar s);

/// Rows are split into consecutive groups of `group` rows; returns the
/// column-wise maximum of each group. Gradient flows to the first arg-max.
Tensor group_max(const Tensor& x, Index group);

/// x - lambda * group_max(x), the maximum broadcast back over its group.
/// `lambda` is a 1x1 tensor.
Tensor max_subtract(const Tensor& x, const Tensor& lambda, Index group);

/// One output row per index list: column-wise max over the listed rows.
/// Every list must be nonempty.
Tensor gather_max(const Tensor& x, const std::vector<std::vector<std::size_t>>& groups);

Tensor select_rows(const Tensor& x, const std::vector<std::size_t>& rows);

/// Constant sparse matrix times x. No gradient flows into `h`.
Tensor sparse_matmul(const SparseMatrix& h, const Tensor& x);

/// Reinterprets the row-major storage with a new row count.
Tensor reshape(const Tensor& x, Index rows, Index cols);

/// Batch normalization with batch statistics (biased variance). Writes
/// the per-channel statistics that were used into `mean_out`/`var_out`.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps,
                        RowVector* mean_out = nullptr, RowVector* var_out = nullptr);

/// Batch normalization with fixed statistics.
Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const RowVector& mean, const RowVector& var, Scalar eps);

/// Mean over rows of -log softmax(logits)[label], shifted by the row max.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

/// Row-wise softmax (no gradient); used for confidences.
Matrix softmax_rows(const Matrix& logits);

/// sum(w .* x) for a constant w of the same shape.
Tensor weighted_sum(const Tensor& x, const Matrix& w);

/// sum_i weights[i] * ||x_i||^2 over the rows of x.
Tensor weighted_row_sqnorm(const Tensor& x, const std::vector<Scalar>& weights);

}  // namespace skp::nn
