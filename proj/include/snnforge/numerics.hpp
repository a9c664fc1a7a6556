#pragma once

#include <cstddef>

#include "snnforge/tensor.hpp"

namespace snnforge {

// Dense kernels shared by the ANN forward/backward passes and the per-timestep
// SNN drive. All accumulation runs in 64-bit floats with a fixed summation
// order so repeated runs are bit-identical.

// y_i = sum_j W_ij * x_j + b_i, summed in ascending-j order.
// weight is [out x in], bias is [out], x holds `in` values (any shape).
Tensor affine(const Tensor& weight, const Tensor& bias, const Tensor& x);

// Cross-correlation with zero padding. kernel is [oc x ic x kh x kw],
// bias [oc], x is [ic x h x w] (a 2-d input is treated as single-channel).
// Accumulation order: input channel, then kernel row, then kernel column.
Tensor conv2d(const Tensor& kernel, const Tensor& bias, const Tensor& x,
              std::size_t stride, std::size_t padding);

// Arithmetic mean over k x k windows, per channel.
Tensor avgpool(const Tensor& x, std::size_t k, std::size_t stride);

// Output extent (h + 2*padding - k)/stride + 1; throws ConfigError when the
// division is not exact or the result would be non-positive.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t padding, const char* what);

}  // namespace snnforge
