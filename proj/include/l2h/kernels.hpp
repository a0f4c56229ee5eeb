#pragma once

#include <span>

#include "l2h/tensor.hpp"

// Stride-1, zero-padded ("same") 2-D convolution kernels. Weights are laid
// out [out][in][k][k], k odd. The output (or gradient) of a convolution may
// occupy a channel slice of a wider tensor, given by `channel_offset`.
//
// Two implementations share these signatures:
//   l2h::kernels    OpenMP-parallel packed-GEMM path used in production.
//   l2h::reference  Serial direct loops kept as the test oracle.
//
// The parallel path computes every output element as a fixed-order sum over
// (in, ky, kx), so results do not depend on the thread count or on where the
// pixel sits inside a tile.

namespace l2h::kernels {

template <typename T>
void conv2d_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                    int out_channels, int ksize, Tensor<T>& out, int channel_offset);

// grad_in += d(out)/d(in)^T grad_out
template <typename T>
void conv2d_backward_input(const Tensor<T>& grad_out, int channel_offset, int out_channels,
                           std::span<const T> weight, int ksize, Tensor<T>& grad_in);

// grad_weight += ..., grad_bias += ...
template <typename T>
void conv2d_backward_params(const Tensor<T>& in, const Tensor<T>& grad_out, int channel_offset,
                            int out_channels, int ksize, std::span<T> grad_weight,
                            std::span<T> grad_bias);

}  // namespace l2h::kernels

namespace l2h::reference {

template <typename T>
void conv2d_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias,
                    int out_channels, int ksize, Tensor<T>& out, int channel_offset);

template <typename T>
void conv2d_backward_input(const Tensor<T>& grad_out, int channel_offset, int out_channels,
                           std::span<const T> weight, int ksize, Tensor<T>& grad_in);

template <typename T>
void conv2d_backward_params(const Tensor<T>& in, const Tensor<T>& grad_out, int channel_offset,
                            int out_channels, int ksize, std::span<T> grad_weight,
                            std::span<T> grad_bias);

}  // namespace l2h::reference
