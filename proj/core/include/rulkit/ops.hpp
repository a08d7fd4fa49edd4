#pragma once

#include <optional>
#include <span>

#include "rulkit/tensor.hpp"

namespace rulkit {

/// Differentiable primitives. Every operation validates shapes, checks the
/// result for non-finite values, and records a backward rule on the active
/// tape when any input requires gradients. Binary operations broadcast the
/// second argument when its shape is a trailing suffix of the first's
/// (e.g. [batch x out] + [out]); nothing more general is supported.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.01);
Tensor exp_op(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt_op(const Tensor& x);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

/// Standard matrix product of rank-2 tensors, [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

/// Same data, new shape (element count preserved).
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);   // -> [1]
Tensor mean(const Tensor& x);  // -> [1]
/// Row sums of a rank-2 tensor, [m x n] -> [m].
Tensor sum_rows(const Tensor& x);

/// Numerically stable softmax along each row of a rank-2 tensor.
Tensor softmax_rows(const Tensor& x);

/// Replaces each row with a one-hot vector at its argmax (first maximum on
/// ties). The backward rule passes gradients straight through to the soft
/// input, which keeps hard attention trainable.
Tensor hard_rows(const Tensor& x);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

/// Rows [begin, begin+count) of a rank-2 tensor.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
/// Rows first, first+stride, ... (count rows) of a rank-2 tensor.
Tensor strided_rows(const Tensor& x, std::size_t first, std::size_t stride,
                    std::size_t count);

/// Each row repeated k times consecutively: [m x n] -> [m*k x n].
Tensor repeat_rows(const Tensor& x, std::size_t k);
/// The whole block stacked k times: [m x n] -> [k*m x n].
Tensor tile_rows(const Tensor& x, std::size_t k);
/// Multiplies row i of x by factors[i]; factors has shape [m] or [m x 1].
Tensor scale_rows(const Tensor& x, const Tensor& factors);

/// The primitive kinds named by the elementwise dispatcher.
enum class ElementwiseKind { add, sub, mul, sigmoid, tanh, leaky_relu, exp, square };

/// Dispatch by kind; binary kinds require b, unary kinds forbid it.
Tensor elementwise(ElementwiseKind kind, const Tensor& a,
                   const std::optional<Tensor>& b = std::nullopt);

}  // namespace rulkit
