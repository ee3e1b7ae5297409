#pragma once

// Differentiable image operators on [N, C, H, W] batches.

#include <array>
#include <vector>

#include "pansharp/autodiff.hpp"

namespace pansharp {

// weight: [out, in, k, k] with k odd, bias: [out].
template <typename T>
struct ConvKernel {
    Var<T> weight;
    Var<T> bias;

    ConvKernel() = default;
    ConvKernel(Var<T> w, Var<T> b);

    std::size_t out_channels() const { return weight.shape()[0]; }
    std::size_t in_channels() const { return weight.shape()[1]; }
    std::size_t size() const { return weight.shape()[2]; }
};

// Cross-correlation with zero padding (k-1)/2; spatial size is preserved.
template <typename T>
Var<T> conv2d(const Var<T>& x, const ConvKernel<T>& k);

template <typename T>
Var<T> relu(const Var<T>& x);

// conv(relu(conv(x, first)), second)
template <typename T>
Var<T> conv_block(const Var<T>& x, const ConvKernel<T>& first, const ConvKernel<T>& second);

// Rotates every spatial kernel by 180 degrees and swaps the in/out axes:
// [out, in, k, k] -> [in, out, k, k]. Differentiable (a permutation).
template <typename T>
Var<T> rotate_transpose(const Var<T>& weight);
template <typename T>
Tensor<T> rotate_transpose(const Tensor<T>& weight);

// Keys cubic convolution kernel with a = -0.5.
double cubic_weight(double distance);

// Separable 1-D resampling map from `in` to `out` samples: each output index
// reads four clamped input taps. Source coordinate is (dst + 0.5) * in/out - 0.5.
struct AxisResampler {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<std::array<std::size_t, 4>> taps;
    std::vector<std::array<double, 4>> weights;

    AxisResampler(std::size_t in_size, std::size_t out_size);
};

// Bicubic resize of the last two extents of any tensor of rank >= 2.
template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w);
// Adjoint of bicubic_resize: maps a gradient of the output back to the input grid.
template <typename T>
Tensor<T> bicubic_resize_adjoint(const Tensor<T>& g, std::size_t in_h, std::size_t in_w);

template <typename T>
Tensor<T> bicubic_upsample(const Tensor<T>& x, std::size_t ratio);
// Throws ShapeError unless both spatial extents are divisible by ratio.
template <typename T>
Tensor<T> bicubic_downsample(const Tensor<T>& x, std::size_t ratio);

template <typename T>
Var<T> bicubic_resize(const Var<T>& x, std::size_t out_h, std::size_t out_w);
template <typename T>
Var<T> bicubic_upsample(const Var<T>& x, std::size_t ratio);
template <typename T>
Var<T> bicubic_downsample(const Var<T>& x, std::size_t ratio);

namespace kernels {

// Raw convolution passes, exposed for benchmarks and tests.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
template <typename T>
Tensor<T> conv2d_grad_input(const Tensor<T>& gy, const Tensor<T>& w);
template <typename T>
Tensor<T> conv2d_grad_weight(const Tensor<T>& x, const Tensor<T>& gy, std::size_t k);

}  // namespace kernels

}  // namespace pansharp
