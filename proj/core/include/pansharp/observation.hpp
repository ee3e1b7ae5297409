#pragma once

// Generative models for the low-resolution multispectral (LRMS) and
// panchromatic (PAN) observations of a high-resolution multispectral (HRMS)
// scene:
//
//   LRMS = decimate_r(circular_blur(HRMS))      per band
//   PAN  = sum_b spectral[b] * HRMS_b           per pixel
//
// Images are [bands, height, width].

#include <cstdint>
#include <optional>
#include <vector>

#include "pansharp/tensor.hpp"

namespace pansharp {

struct DegradationSpec {
    Tensor<double> blur;            // [k, k], k odd, sums to 1
    std::size_t ratio = 4;          // >= 2
    std::vector<double> spectral;   // length B, nonnegative, sums to 1

    std::size_t bands() const { return spectral.size(); }
    // Throws std::invalid_argument naming the violated invariant.
    void validate() const;
};

// size x size Gaussian, normalized to sum 1.
Tensor<double> gaussian_kernel(std::size_t size, double sigma);

// 7x7 Gaussian (sigma 2), ratio 4, uniform spectral weights.
DegradationSpec default_spec(std::size_t bands, std::size_t ratio = 4);

struct ImagePair {
    Tensor<float> lrms;                   // [B, m, n]
    Tensor<float> pan;                    // [1, r*m, r*n]
    std::optional<Tensor<float>> hrms_gt; // [B, r*m, r*n]
};

template <typename T>
Tensor<T> apply_blur_downsample(const Tensor<T>& h, const DegradationSpec& spec);
// Adjoint: zero-insertion upsampling followed by circular correlation with the
// 180-degree rotated blur. Output is [B, m*r, n*r].
template <typename T>
Tensor<T> apply_blur_downsample_adjoint(const Tensor<T>& l, const DegradationSpec& spec);
// Circular correlation of every band with the blur (no decimation).
template <typename T>
Tensor<T> circular_blur(const Tensor<T>& h, const Tensor<double>& kernel);

template <typename T>
Tensor<T> apply_spectral_response(const Tensor<T>& h, const DegradationSpec& spec);
// [1, M, N] -> [B, M, N]: band b receives spectral[b] * p.
template <typename T>
Tensor<T> apply_spectral_response_adjoint(const Tensor<T>& p, const DegradationSpec& spec);

// Wald protocol: both the HRMS image and the r-times larger PAN are degraded
// one level; the original HRMS becomes the ground truth.
ImagePair wald_degrade(const Tensor<float>& hrms, const Tensor<float>& pan, const DegradationSpec& spec);

struct Scene {
    Tensor<float> hrms;  // [B, M, N] in [0, 1]
    Tensor<float> pan;   // [1, M, N]
    Tensor<float> lrms;  // [B, M/r, N/r]
};

// Smooth band-correlated random fields plus rectangles and disks. Deterministic per seed.
Scene synthesize_scene(std::uint64_t seed, std::size_t height, std::size_t width, const DegradationSpec& spec);

template <typename T>
struct Normalized {
    Tensor<T> image;
    T divisor;
};

// Divides by the maximum value. Throws NumericError when max <= 0.
template <typename T>
Normalized<T> normalize(const Tensor<T>& patch);

}  // namespace pansharp
