#pragma once

// Full-reference quality metrics for fused images. Inputs are [B, H, W]
// images in [0, 1]; the first argument is the estimate, the second the
// reference.

#include <limits>
#include <span>
#include <string>

#include "pansharp/tensor.hpp"

namespace pansharp {

// 10 log10(1 / MSE) over all bands and pixels; +inf when MSE is 0.
double psnr(const Tensor<double>& x, const Tensor<double>& y);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 1, averaged over all fully covered window positions and bands.
double ssim(const Tensor<double>& x, const Tensor<double>& y);

// Mean spectral angle in radians. Pixels where either spectrum has norm < 1e-8
// are skipped; throws NumericError if every pixel is skipped.
double sam(const Tensor<double>& x, const Tensor<double>& y);

// (100 / ratio) * sqrt(mean_b (RMSE_b / mean(reference_b))^2).
double ergas(const Tensor<double>& x, const Tensor<double>& reference, double ratio);

struct MetricsReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double sam = 0.0;
    double ergas = 0.0;
    std::size_t n_images = 0;
    // Images with identical pairs; they are excluded from the PSNR mean.
    std::size_t n_psnr_infinite = 0;
};

MetricsReport evaluate(const Tensor<double>& fused, const Tensor<double>& reference, double ratio);

// Arithmetic mean of per-image metrics.
MetricsReport evaluate_set(std::span<const Tensor<double>> references, std::span<const Tensor<double>> fused,
                           double ratio);

// Four-decimal rendering; infinite PSNR prints as "inf".
std::string format_metric(double v);

}  // namespace pansharp
