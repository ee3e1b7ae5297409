#pragma once

// Classical pan-sharpening references. LRMS is [B, m, n], PAN is
// [1, r*m, r*n]; every result is clipped to [0, 1].

#include <string>

#include "pansharp/tensor.hpp"

namespace pansharp {

struct FusionResult {
    Tensor<float> image;
    std::string method;
    double runtime_seconds = 0.0;
};

constexpr float kDivisionGuard = 1e-6f;

Tensor<float> bicubic_baseline(const Tensor<float>& lrms, std::size_t ratio);
// U + (PAN - mean_b U). Requires at least three bands.
Tensor<float> ihs_fuse(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t ratio);
// U_b * PAN / (mean_b U + eps).
Tensor<float> brovey_fuse(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t ratio);
// U_b + (PAN - box(PAN)), box of side 2r+1.
Tensor<float> hpf_fuse(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t ratio);
// U_b * PAN / (box(PAN) + eps).
Tensor<float> sfim_fuse(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t ratio);

// Mean filter over a size x size window with edge replication.
Tensor<float> box_blur(const Tensor<float>& image, std::size_t size);

// Dispatch by name: bicubic, ihs, brovey, hpf, sfim. Records wall time.
FusionResult run_baseline(const std::string& method, const Tensor<float>& lrms, const Tensor<float>& pan,
                          std::size_t ratio);

}  // namespace pansharp
