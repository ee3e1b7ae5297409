#include "pansharp/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "pansharp/image_ops.hpp"

namespace pansharp {

namespace {

void check_inputs(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t r, const char* what) {
    if (lrms.rank() != 3 || pan.rank() != 3 || pan.dim(0) != 1 || pan.dim(1) != lrms.dim(1) * r ||
        pan.dim(2) != lrms.dim(2) * r)
        throw ShapeError(std::string(what) + ": LRMS " + shape_str(lrms.shape()) + " and PAN " +
                         shape_str(pan.shape()) + " are inconsistent at ratio " + std::to_string(r));
}

Tensor<float> band_mean(const Tensor<float>& u) {
    const std::size_t B = u.dim(0), P = u.dim(1) * u.dim(2);
    Tensor<float> m({1, u.dim(1), u.dim(2)});
    for (std::size_t p = 0; p < P; ++p) {
        float s = 0.0f;
        for (std::size_t b = 0; b < B; ++b) s += u[b * P + p];
        m[p] = s / static_cast<float>(B);
    }
    return m;
}

Tensor<float> clipped(Tensor<float> t) {
    for (float& v : t.data()) v = std::clamp(v, 0.0f, 1.0f);
    return t;
}

}  // namespace

Tensor<float> bicubic_baseline(const Tensor<float>& lrms, std::size_t ratio) {
    return clipped(bicubic_upsample(lrms, ratio));
}

Tensor<float> box_blur(const Tensor<float>& image, std::size_t size) {
    if (image.rank() != 3) throw ShapeError("box_blur: expected [C,H,W], got " + shape_str(image.shape()));
    if (size % 2 == 0) throw std::invalid_argument("box_blur: window size must be odd");
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const auto half = static_cast<std::ptrdiff_t>(size / 2);
    const auto sh = static_cast<std::ptrdiff_t>(H), sw = static_cast<std::ptrdiff_t>(W);
    Tensor<float> tmp(image.shape()), out(image.shape());
    const float inv = 1.0f / static_cast<float>(size);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::ptrdiff_t y = 0; y < sh; ++y)
            for (std::ptrdiff_t x = 0; x < sw; ++x) {
                float s = 0.0f;
                for (std::ptrdiff_t d = -half; d <= half; ++d)
                    s += image.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x + d, 0, sw - 1)));
                tmp.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s * inv;
            }
        for (std::ptrdiff_t y = 0; y < sh; ++y)
            for (std::ptrdiff_t x = 0; x < sw; ++x) {
                float s = 0.0f;
                for (std::ptrdiff_t d = -half; d <= half; ++d)
                    s += tmp.at(c, static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y + d, 0, sh - 1)), static_cast<std::size_t>(x));
                out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s * inv;
            }
    }
    return out;
}

Tensor<float> ihs_fuse(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t ratio) {
    check_inputs(lrms, pan, ratio, "ihs_fuse");
    if (lrms.dim(0) < 3) throw std::invalid_argument("ihs_fuse: needs at least 3 bands, got " + std::to_string(lrms.dim(0)));
    Tensor<float> u = bicubic_upsample(lrms, ratio);
    const Tensor<float> intensity = band_mean(u);
    const std::size_t B = u.dim(0), P = u.dim(1) * u.dim(2);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < P; ++p) u[b * P + p] += pan[p] - intensity[p];
    return clipped(std::move(u));
}

Tensor<float> brovey_fuse(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t ratio) {
    check_inputs(lrms, pan, ratio, "brovey_fuse");
    Tensor<float> u = bicubic_upsample(lrms, ratio);
    const Tensor<float> intensity = band_mean(u);
    const std::size_t B = u.dim(0), P = u.dim(1) * u.dim(2);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < P; ++p) u[b * P + p] = u[b * P + p] * pan[p] / (intensity[p] + kDivisionGuard);
    return clipped(std::move(u));
}

Tensor<float> hpf_fuse(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t ratio) {
    check_inputs(lrms, pan, ratio, "hpf_fuse");
    Tensor<float> u = bicubic_upsample(lrms, ratio);
    const Tensor<float> low = box_blur(pan, 2 * ratio + 1);
    const std::size_t B = u.dim(0), P = u.dim(1) * u.dim(2);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < P; ++p) u[b * P + p] += pan[p] - low[p];
    return clipped(std::move(u));
}

Tensor<float> sfim_fuse(const Tensor<float>& lrms, const Tensor<float>& pan, std::size_t ratio) {
    check_inputs(lrms, pan, ratio, "sfim_fuse");
    Tensor<float> u = bicubic_upsample(lrms, ratio);
    const Tensor<float> low = box_blur(pan, 2 * ratio + 1);
    const std::size_t B = u.dim(0), P = u.dim(1) * u.dim(2);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < P; ++p) u[b * P + p] = u[b * P + p] * pan[p] / (low[p] + kDivisionGuard);
    return clipped(std::move(u));
}

FusionResult run_baseline(const std::string& method, const Tensor<float>& lrms, const Tensor<float>& pan,
                          std::size_t ratio) {
    const auto t0 = std::chrono::steady_clock::now();
    FusionResult r;
    r.method = method;
    if (method == "bicubic")
        r.image = bicubic_baseline(lrms, ratio);
    else if (method == "ihs")
        r.image = ihs_fuse(lrms, pan, ratio);
    else if (method == "brovey")
        r.image = brovey_fuse(lrms, pan, ratio);
    else if (method == "hpf")
        r.image = hpf_fuse(lrms, pan, ratio);
    else if (method == "sfim")
        r.image = sfim_fuse(lrms, pan, ratio);
    else
        throw std::invalid_argument("unknown baseline method '" + method + "'");
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace pansharp
