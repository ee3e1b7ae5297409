#include "pansharp/observation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "pansharp/image_ops.hpp"

namespace pansharp {

void DegradationSpec::validate() const {
    if (blur.rank() != 2 || blur.dim(0) != blur.dim(1) || blur.dim(0) % 2 == 0)
        throw std::invalid_argument("blur kernel must be square with odd size, got " + shape_str(blur.shape()));
    if (std::abs(sum_value(blur) - 1.0) > 1e-6)
        throw std::invalid_argument("blur kernel must sum to 1, sums to " + std::to_string(sum_value(blur)));
    if (ratio < 2) throw std::invalid_argument("ratio must be >= 2, got " + std::to_string(ratio));
    if (spectral.empty()) throw std::invalid_argument("spectral weights are empty");
    double s = 0.0;
    for (double w : spectral) {
        if (!(w >= 0.0)) throw std::invalid_argument("spectral weights must be nonnegative");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-6)
        throw std::invalid_argument("spectral weights must sum to 1, sum to " + std::to_string(s));
}

Tensor<double> gaussian_kernel(std::size_t size, double sigma) {
    if (size % 2 == 0) throw std::invalid_argument("gaussian kernel size must be odd");
    Tensor<double> k({size, size});
    const double c = static_cast<double>(size / 2);
    double total = 0.0;
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double dy = static_cast<double>(y) - c, dx = static_cast<double>(x) - c;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k[y * size + x] = v;
            total += v;
        }
    for (double& v : k.data()) v /= total;
    return k;
}

DegradationSpec default_spec(std::size_t bands, std::size_t ratio) {
    DegradationSpec spec;
    spec.blur = gaussian_kernel(7, 2.0);
    spec.ratio = ratio;
    spec.spectral.assign(bands, 1.0 / static_cast<double>(bands));
    return spec;
}

namespace {

void require_image(const Shape& s, const char* what) {
    if (s.size() != 3) throw ShapeError(std::string(what) + ": expected [bands,H,W], got " + shape_str(s));
}

// wrapped[o * K + i] = (o * step + i - K/2) mod n: the source index of tap i
// for output o.
std::vector<std::size_t> wrap_table(std::size_t outputs, std::size_t step, std::size_t K, std::size_t n) {
    const auto sn = static_cast<std::ptrdiff_t>(n);
    const auto c = static_cast<std::ptrdiff_t>(K / 2);
    std::vector<std::size_t> t(outputs * K);
    for (std::size_t o = 0; o < outputs; ++o)
        for (std::size_t i = 0; i < K; ++i) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(o * step + i) - c;
            t[o * K + i] = static_cast<std::size_t>(((src % sn) + sn) % sn);
        }
    return t;
}

// Circular correlation of every band with `kernel`, evaluated at every
// `step`-th pixel starting at 0.
template <typename T>
Tensor<T> strided_circular_blur(const Tensor<T>& h, const Tensor<double>& kernel, std::size_t step) {
    const std::size_t B = h.dim(0), M = h.dim(1), N = h.dim(2), K = kernel.dim(0);
    const std::size_t m = M / step, n = N / step;
    const auto rows = wrap_table(m, step, K, M), cols = wrap_table(n, step, K, N);
    Tensor<T> out({B, m, n});
    for (std::size_t b = 0; b < B; ++b) {
        const T* plane = h.data().data() + b * M * N;
        for (std::size_t y = 0; y < m; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                double acc = 0.0;
                for (std::size_t i = 0; i < K; ++i) {
                    const T* row = plane + rows[y * K + i] * N;
                    const std::size_t* cx = &cols[x * K];
                    for (std::size_t j = 0; j < K; ++j) acc += kernel[i * K + j] * static_cast<double>(row[cx[j]]);
                }
                out.at(b, y, x) = static_cast<T>(acc);
            }
    }
    return out;
}

}  // namespace

template <typename T>
Tensor<T> circular_blur(const Tensor<T>& h, const Tensor<double>& kernel) {
    require_image(h.shape(), "circular_blur");
    return strided_circular_blur(h, kernel, 1);
}

template <typename T>
Tensor<T> apply_blur_downsample(const Tensor<T>& h, const DegradationSpec& spec) {
    require_image(h.shape(), "apply_blur_downsample");
    const std::size_t r = spec.ratio;
    if (h.dim(1) % r != 0 || h.dim(2) % r != 0)
        throw ShapeError("apply_blur_downsample: " + shape_str(h.shape()) + " not divisible by ratio " +
                         std::to_string(r));
    return strided_circular_blur(h, spec.blur, r);
}

template <typename T>
Tensor<T> apply_blur_downsample_adjoint(const Tensor<T>& l, const DegradationSpec& spec) {
    require_image(l.shape(), "apply_blur_downsample_adjoint");
    const std::size_t r = spec.ratio;
    const std::size_t B = l.dim(0), M = l.dim(1) * r, N = l.dim(2) * r;
    Tensor<T> up({B, M, N});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t y = 0; y < l.dim(1); ++y)
            for (std::size_t x = 0; x < l.dim(2); ++x) up.at(b, y * r, x * r) = l.at(b, y, x);
    const std::size_t K = spec.blur.dim(0);
    Tensor<double> flipped({K, K});
    for (std::size_t i = 0; i < K * K; ++i) flipped[i] = spec.blur[K * K - 1 - i];
    return circular_blur(up, flipped);
}

template <typename T>
Tensor<T> apply_spectral_response(const Tensor<T>& h, const DegradationSpec& spec) {
    require_image(h.shape(), "apply_spectral_response");
    if (h.dim(0) != spec.bands())
        throw ShapeError("apply_spectral_response: image has " + std::to_string(h.dim(0)) + " bands, spectral weights " +
                         std::to_string(spec.bands()));
    const std::size_t B = h.dim(0), M = h.dim(1), N = h.dim(2);
    Tensor<T> p({1, M, N});
    for (std::size_t y = 0; y < M; ++y)
        for (std::size_t x = 0; x < N; ++x) {
            double acc = 0.0;
            for (std::size_t b = 0; b < B; ++b) acc += spec.spectral[b] * static_cast<double>(h.at(b, y, x));
            p.at(0, y, x) = static_cast<T>(acc);
        }
    return p;
}

template <typename T>
Tensor<T> apply_spectral_response_adjoint(const Tensor<T>& p, const DegradationSpec& spec) {
    require_image(p.shape(), "apply_spectral_response_adjoint");
    if (p.dim(0) != 1) throw ShapeError("apply_spectral_response_adjoint: expected one band, got " + shape_str(p.shape()));
    const std::size_t B = spec.bands(), M = p.dim(1), N = p.dim(2);
    Tensor<T> h({B, M, N});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t y = 0; y < M; ++y)
            for (std::size_t x = 0; x < N; ++x)
                h.at(b, y, x) = static_cast<T>(spec.spectral[b] * static_cast<double>(p.at(0, y, x)));
    return h;
}

ImagePair wald_degrade(const Tensor<float>& hrms, const Tensor<float>& pan, const DegradationSpec& spec) {
    require_image(hrms.shape(), "wald_degrade");
    require_image(pan.shape(), "wald_degrade");
    const std::size_t r = spec.ratio;
    if (pan.dim(0) != 1 || pan.dim(1) != hrms.dim(1) * r || pan.dim(2) != hrms.dim(2) * r)
        throw ShapeError("wald_degrade: PAN " + shape_str(pan.shape()) + " must be [1, " +
                         std::to_string(hrms.dim(1) * r) + ", " + std::to_string(hrms.dim(2) * r) +
                         "] for HRMS " + shape_str(hrms.shape()) + " at ratio " + std::to_string(r));
    ImagePair pair;
    pair.lrms = apply_blur_downsample(hrms, spec);
    pair.pan = apply_blur_downsample(pan, spec);
    pair.hrms_gt = hrms;
    return pair;
}

namespace {

// Smooth zero-mean field with unit standard deviation: coarse white noise,
// bicubic-interpolated to full size.
Tensor<double> smooth_field(std::mt19937_64& rng, std::size_t M, std::size_t N, std::size_t cell) {
    const std::size_t gh = std::max<std::size_t>(2, M / cell), gw = std::max<std::size_t>(2, N / cell);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor<double> coarse({1, gh, gw});
    for (double& v : coarse.data()) v = normal(rng);
    Tensor<double> f = bicubic_resize(coarse, M, N);
    const double n = static_cast<double>(f.size());
    const double mean = sum_value(f) / n;
    double var = 0.0;
    for (double v : f.data()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n) + 1e-12;
    for (double& v : f.data()) v = (v - mean) / sd;
    return f;
}

}  // namespace

Scene synthesize_scene(std::uint64_t seed, std::size_t M, std::size_t N, const DegradationSpec& spec) {
    spec.validate();
    const std::size_t B = spec.bands();
    if (M % spec.ratio != 0 || N % spec.ratio != 0)
        throw ShapeError("synthesize_scene: " + std::to_string(M) + "x" + std::to_string(N) +
                         " not divisible by ratio " + std::to_string(spec.ratio));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const Tensor<double> common = smooth_field(rng, M, N, 16);
    const Tensor<double> texture = smooth_field(rng, M, N, 3);
    Tensor<double> h({B, M, N});
    for (std::size_t b = 0; b < B; ++b) {
        const Tensor<double> own = smooth_field(rng, M, N, 16);
        const double corr = 0.6 + 0.35 * uni(rng);
        const double level = 0.3 + 0.2 * uni(rng);
        const double own_w = std::sqrt(1.0 - corr * corr);
        for (std::size_t i = 0; i < M * N; ++i)
            h[b * M * N + i] = level + 0.12 * (corr * common[i] + own_w * own[i]) + 0.03 * texture[i];
    }

    const std::size_t shapes = 6 + static_cast<std::size_t>(uni(rng) * 6.0);
    std::vector<double> gain(B);
    for (std::size_t s = 0; s < shapes; ++s) {
        const bool disk = uni(rng) < 0.5;
        const double cy = uni(rng) * static_cast<double>(M), cx = uni(rng) * static_cast<double>(N);
        const double ry = (0.04 + 0.16 * uni(rng)) * static_cast<double>(M);
        const double rx = disk ? ry : (0.04 + 0.16 * uni(rng)) * static_cast<double>(N);
        const double amp = uni(rng) * 0.6 - 0.3;
        for (std::size_t b = 0; b < B; ++b) gain[b] = 0.6 + 0.8 * uni(rng);
        for (std::size_t y = 0; y < M; ++y)
            for (std::size_t x = 0; x < N; ++x) {
                const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
                const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
                const bool inside = disk ? (dy * dy + dx * dx <= 1.0) : (std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0);
                if (!inside) continue;
                for (std::size_t b = 0; b < B; ++b) h.at(b, y, x) += amp * gain[b];
            }
    }
    for (double& v : h.data()) v = std::clamp(v, 0.0, 1.0);

    Scene scene;
    scene.hrms = h.cast<float>();
    scene.pan = apply_spectral_response(scene.hrms, spec);
    scene.lrms = apply_blur_downsample(scene.hrms, spec);
    return scene;
}

template <typename T>
Normalized<T> normalize(const Tensor<T>& patch) {
    const T mx = max_value(patch);
    if (!(mx > T(0))) throw NumericError("normalize: patch maximum is not positive (degenerate patch)");
    Tensor<T> out = patch;
    for (T& v : out.data()) v /= mx;
    return {std::move(out), mx};
}

#define PANSHARP_INSTANTIATE(T)                                                                 \
    template Tensor<T> circular_blur<T>(const Tensor<T>&, const Tensor<double>&);               \
    template Tensor<T> apply_blur_downsample<T>(const Tensor<T>&, const DegradationSpec&);      \
    template Tensor<T> apply_blur_downsample_adjoint<T>(const Tensor<T>&, const DegradationSpec&); \
    template Tensor<T> apply_spectral_response<T>(const Tensor<T>&, const DegradationSpec&);    \
    template Tensor<T> apply_spectral_response_adjoint<T>(const Tensor<T>&, const DegradationSpec&); \
    template Normalized<T> normalize<T>(const Tensor<T>&);

PANSHARP_INSTANTIATE(float)
PANSHARP_INSTANTIATE(double)
#undef PANSHARP_INSTANTIATE

}  // namespace pansharp
