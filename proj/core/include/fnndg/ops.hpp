// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations over Tensor. Each records a node when any input
// lives on a Tape (see tensor.hpp) and otherwise evaluates eagerly.
#pragma once

#include "fnndg/tensor.hpp"

namespace fnndg {

/// Floor applied by clamped_log before taking the logarithm.
inline constexpr double kLogClamp = 1e-12;
/// Rows whose norm is below this get zero gradient from row_l2_norm.
inline constexpr double kNormEpsilon = 1e-12;

/// [n x k] * [k x m] -> [n x m]. Throws ShapeError naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Adds the [1 x m] row `bias` to every row of `x`.
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// max(0, x). The subgradient at 0 is 0.
Tensor relu(const Tensor& x);

/// Per-row Euclidean norm, [n x m] -> [n x 1].
Tensor row_l2_norm(const Tensor& x);

/// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& logits);

/// Same values, no gradient path back to `x`.
Tensor detach(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
/// Elementwise (Hadamard) product.
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor square(const Tensor& x);
/// log(max(x, kLogClamp)); the gradient is zero where the clamp is active.
Tensor clamped_log(const Tensor& x);

/// Sum of all entries -> [1 x 1].
Tensor sum(const Tensor& x);
/// Mean of all entries -> [1 x 1].
Tensor mean(const Tensor& x);
/// Column means over the rows, [n x m] -> [1 x m].
Tensor mean_rows(const Tensor& x);

}  // namespace fnndg
