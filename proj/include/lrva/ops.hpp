#pragma once

#include <span>
#include <vector>

#include "lrva/tensor.hpp"

namespace lrva {

// Elementwise / scalar
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& x, double c);
// Multiply by a trainable one-element tensor (keeps the scalar on the tape).
Tensor mul_scalar_tensor(const Tensor& x, const Tensor& s);
// Adds `bias` (length = last extent) to every row of x.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);

// Convolution over [C_in, H, W] with kernel [C_out, C_in, u, u].
// Output extent: floor((H - u) / stride) + 1; valid padding only.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride);
// Same contraction but reading the u x u window of a larger kernel at
// offset (kr, kc); lets sub-kernels convolve without copying slices.
Tensor conv2d_window(const Tensor& input, const Tensor& kernel, int kr, int kc, int u, int stride);

// Max pooling over [C, H, W]; ties resolve to the first element in
// row-major window order.
Tensor max_pool2d(const Tensor& x, int k, int stride);

// Nonlinearities / normalization
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor gelu(const Tensor& x);
Tensor l2_normalize_rows(const Tensor& x);

// Reductions / shape
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_rows(const Tensor& x, int row_begin, int row_end);
Tensor slice_cols(const Tensor& x, int col_begin, int col_end);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// [C, H, W] feature map -> [H*W, C] token matrix (row-major spatial order).
Tensor tokens_from_feature_map(const Tensor& fm);

// sum_t coeffs[t] * xs[t]; all xs share a shape, coeffs is rank-1 length T.
Tensor weighted_sum(std::span<const Tensor> xs, const Tensor& coeffs);

// Mean cross-entropy of logits [N, C] against integer labels.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Expands a [2h, 2h] global map into the [h^2, h^2] matrix whose row (i,j)
// is the flattened h x h crop with top-left (h - i, h - j).
Tensor global_to_token_attention(const Tensor& global_map, int h);

}  // namespace lrva
