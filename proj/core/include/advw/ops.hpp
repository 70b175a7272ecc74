#pragma once

#include <span>

#include "advw/tensor.hpp"

namespace advw {

// Forward primitives. These are pure functions over tensors; the tape in
// tape.hpp registers the same kernels together with their backward rules.

// Matrix product of rank-2 tensors [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Valid (no padding) cross-correlation. Accepts a single image [C x H x W]
// or a batch [B x C x H x W]; kernels are [F x C x k x k], bias is [F].
// Output spatial size is floor((H - k) / stride) + 1 per axis.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride);

Tensor relu(const Tensor& x);

// Row-wise softmax with temperature: p_i = exp(z_i / T) / sum_j exp(z_j / T),
// computed with max subtraction. Accepts [K] or [B x K]; requires T > 0, K >= 2.
Tensor softmax_with_temperature(const Tensor& logits, double temperature);

// -ln(probs[true_class]) with the probability clamped to >= 1e-12 before the log.
double cross_entropy(const Tensor& probs, int true_class);

// sum_i p_i ln(p_i / q_i) with 0 ln(0/q) = 0 and q clamped to >= 1e-12.
double kl_divergence(const Tensor& p, const Tensor& q);

// Probability floor applied before every logarithm.
inline constexpr double kProbFloor = 1e-12;

// Index of the largest element; ties resolve to the lowest index.
int argmax(std::span<const double> values);

// Index of the largest element excluding `skip`; ties resolve to the lowest index.
int argmax_excluding(std::span<const double> values, int skip);

namespace detail {
// Shape of a valid convolution output, shared by the forward and backward paths.
struct ConvDims {
  int batch, in_channels, height, width;
  int out_channels, kernel, stride;
  int out_height, out_width;
  bool batched;  // rank-4 input
};
ConvDims conv_dims(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride);
}  // namespace detail

}  // namespace advw
