#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "antq/tensor.hpp"

// Differentiable tensor operations. Every op records a backward closure on
// the active tape when at least one input requires a gradient; otherwise it
// is a plain value computation.
namespace antq::ad {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
/// x[..., n] + bias[n], broadcast over leading dimensions.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
/// Natural log; every element must be > 0.
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
/// Elementwise clamp; the gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x, int axis = -1);
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor mean(const Tensor& x, int axis, bool keepdim = false);
/// Sum of all elements as a rank-0 tensor.
Tensor sum(const Tensor& x);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end);
/// Picks elements by flat row-major index into a rank-1 tensor.
Tensor gather(const Tensor& x, std::span<const std::size_t> flat_indices);
Tensor reshape(const Tensor& x, Shape shape);

/// Row-wise temporal IoU of [n x 2] interval tensors (columns start, end).
/// Two zero-length intervals give 1 when identical and 0 otherwise.
Tensor interval_iou(const Tensor& a, const Tensor& b);

/// Inverted dropout. p == 0 returns x unchanged.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

}  // namespace antq::ad
