#pragma once

// Differentiable primitives. Shapes are explicit: no broadcasting except
// the bias-row addition in add_row.

#include <cstdint>
#include <span>
#include <vector>

#include "kdseq/tensor.hpp"

namespace kdseq {

using TokenId = std::int32_t;

/// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched product: [B x m x k] * [B x k x n] -> [B x m x n]
Tensor bmm(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// x[m x n] + bias broadcast over rows; bias is [1 x n] or [n].
Tensor add_row(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double factor);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor log(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);
/// Fused log(softmax(x)); finite even where softmax underflows.
Tensor log_softmax(const Tensor& x, std::size_t axis);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

/// Row lookup: table[V x E], ids -> [ids.size() x E].
Tensor gather(const Tensor& table, std::span<const TokenId> ids);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// -sum_k target[k] * log_probs[k], summed over all leading slices.
/// Every slice of `target` along the last axis must sum to 1 within 1e-6.
Tensor cross_entropy(const Tensor& target_dist, const Tensor& log_probs);

}  // namespace kdseq
