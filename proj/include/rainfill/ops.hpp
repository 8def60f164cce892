#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rainfill/tensor.hpp"

namespace rainfill::ops {

using Extent3 = std::array<int64_t, 3>;

// Elementwise. Binary ops accept identical shapes or a single-element operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor square(const Tensor& a);
Tensor silu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// x: (B, In), weight: (Out, In), bias: (Out) or undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// x: (B, Cin, L, H, W), weight: (Cout, Cin, kt, kh, kw), bias: (Cout) or undefined.
Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, Extent3 stride = {1, 1, 1},
              Extent3 padding = {0, 0, 0});
/// x: (B, Cin, L, H, W), weight: (Cin, Cout, kt, kh, kw), bias: (Cout) or undefined.
/// Output extent per axis: (n - 1) * stride - 2 * padding + kernel.
Tensor conv_transpose3d(const Tensor& x, const Tensor& weight, const Tensor& bias, Extent3 stride,
                        Extent3 padding = {0, 0, 0});
/// Non-overlapping max pooling; window doubles as stride. Extents must divide.
Tensor maxpool3d(const Tensor& x, Extent3 window = {1, 2, 2});
/// x: (B, C, ...); gamma/beta: (C).
Tensor group_norm(const Tensor& x, int64_t groups, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
/// (B, C, L, H, W) -> (B, C, 1, 1, 1)
Tensor adaptive_avg_pool3d(const Tensor& x);
Tensor concat(const std::vector<Tensor>& xs, int axis);

/// x: (B, C, ...), v: (B, C). Adds v[b, c] to every element of plane (b, c).
Tensor add_channel_bias(const Tensor& x, const Tensor& v);
/// x: (B, C, ...), s: (B, C). Multiplies plane (b, c) by s[b, c].
Tensor scale_channels(const Tensor& x, const Tensor& s);

/// mean over all elements of w[h] * (pred - target)^2, with h the
/// second-to-last axis. `target` is treated as a constant.
Tensor row_weighted_mse(const Tensor& pred, const Tensor& target, const std::vector<double>& row_weights);
/// Same weighting applied to |pred - target|.
Tensor row_weighted_l1(const Tensor& pred, const Tensor& target, const std::vector<double>& row_weights);

}  // namespace rainfill::ops
