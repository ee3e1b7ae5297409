#pragma once

// Test-side reference implementations. Everything here is written directly
// from the defining formulas and shares no code with the library beyond the
// Tensor container.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pansharp/tensor.hpp"

namespace oracle {

using pansharp::Shape;
using pansharp::Tensor;

inline Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor<double> t(std::move(shape));
    for (double& v : t.data()) v = d(rng);
    return t;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Zero-padded cross-correlation over [N, Ci, H, W] with w [Co, Ci, k, k].
inline Tensor<double> conv2d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
    const long N = long(x.dim(0)), Ci = long(x.dim(1)), H = long(x.dim(2)), W = long(x.dim(3));
    const long Co = long(w.dim(0)), K = long(w.dim(2)), c = K / 2;
    Tensor<double> y({std::size_t(N), std::size_t(Co), std::size_t(H), std::size_t(W)});
    for (long n = 0; n < N; ++n)
        for (long o = 0; o < Co; ++o)
            for (long i = 0; i < H; ++i)
                for (long j = 0; j < W; ++j) {
                    double s = b[std::size_t(o)];
                    for (long ci = 0; ci < Ci; ++ci)
                        for (long u = 0; u < K; ++u)
                            for (long v = 0; v < K; ++v) {
                                const long yy = i + u - c, xx = j + v - c;
                                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                                s += w[std::size_t(((o * Ci + ci) * K + u) * K + v)] *
                                     x[std::size_t(((n * Ci + ci) * H + yy) * W + xx)];
                            }
                    y[std::size_t(((n * Co + o) * H + i) * W + j)] = s;
                }
    return y;
}

inline Tensor<double> relu(Tensor<double> x) {
    for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
    return x;
}

// Keys cubic kernel, a = -0.5.
inline double cubic(double t) {
    const double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

// Dense [out, in] matrix of 1-D bicubic resampling with half-pixel centers
// and clamped edges.
inline std::vector<std::vector<double>> resample_matrix(std::size_t in, std::size_t out) {
    std::vector<std::vector<double>> m(out, std::vector<double>(in, 0.0));
    const double scale = double(in) / double(out);
    for (std::size_t i = 0; i < out; ++i) {
        const double src = (double(i) + 0.5) * scale - 0.5;
        const long base = long(std::floor(src));
        for (long t = base - 1; t <= base + 2; ++t) {
            const long clamped = std::min<long>(std::max<long>(t, 0), long(in) - 1);
            m[i][std::size_t(clamped)] += cubic(src - double(t));
        }
    }
    return m;
}

// Bicubic resize of every [H, W] plane of a tensor with rank >= 2.
inline Tensor<double> resize(const Tensor<double>& x, std::size_t oh, std::size_t ow) {
    const std::size_t H = x.height(), W = x.width(), planes = x.size() / (H * W);
    const auto my = resample_matrix(H, oh), mx = resample_matrix(W, ow);
    Shape shape = x.shape();
    shape[shape.size() - 2] = oh;
    shape[shape.size() - 1] = ow;
    Tensor<double> y(shape);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                double s = 0.0;
                for (std::size_t u = 0; u < H; ++u)
                    for (std::size_t v = 0; v < W; ++v) s += my[i][u] * mx[j][v] * x[(p * H + u) * W + v];
                y[(p * oh + i) * ow + j] = s;
            }
    return y;
}

// Dense matrix of L = D K H for one band: rows index (i, j) of the m x n
// output, columns (y, x) of the M x N input. Circular correlation with the
// blur centered on the sample, decimation at offset 0.
inline std::vector<std::vector<double>> blur_decimate_matrix(const Tensor<double>& blur, std::size_t M, std::size_t N,
                                                             std::size_t r) {
    const long K = long(blur.dim(0)), c = K / 2, m = long(M / r), n = long(N / r);
    std::vector<std::vector<double>> A(std::size_t(m * n), std::vector<double>(M * N, 0.0));
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < n; ++j)
            for (long u = 0; u < K; ++u)
                for (long v = 0; v < K; ++v) {
                    const long y = ((long(r) * i + u - c) % long(M) + long(M)) % long(M);
                    const long x = ((long(r) * j + v - c) % long(N) + long(N)) % long(N);
                    A[std::size_t(i * n + j)][std::size_t(y * long(N) + x)] += blur[std::size_t(u * K + v)];
                }
    return A;
}

inline std::vector<double> matvec(const std::vector<std::vector<double>>& A, const std::vector<double>& x) {
    std::vector<double> y(A.size(), 0.0);
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += A[i][j] * x[j];
    return y;
}

inline std::vector<double> matvec_t(const std::vector<std::vector<double>>& A, const std::vector<double>& y) {
    std::vector<double> x(A[0].size(), 0.0);
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) x[j] += A[i][j] * y[i];
    return x;
}

// Applies a per-band dense operator to a [B, H, W] image.
inline Tensor<double> per_band(const std::vector<std::vector<double>>& A, const Tensor<double>& img, std::size_t oh,
                               std::size_t ow, bool transpose = false) {
    const std::size_t B = img.dim(0), P = img.dim(1) * img.dim(2);
    Tensor<double> out({B, oh, ow});
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> v(img.data().begin() + long(b * P), img.data().begin() + long((b + 1) * P));
        const auto r = transpose ? matvec_t(A, v) : matvec(A, v);
        for (std::size_t i = 0; i < r.size(); ++i) out[b * oh * ow + i] = r[i];
    }
    return out;
}

// sum_b s_b h_b per pixel: [B, H, W] -> [1, H, W].
inline Tensor<double> spectral(const Tensor<double>& h, const std::vector<double>& s) {
    const std::size_t B = h.dim(0), H = h.dim(1), W = h.dim(2);
    Tensor<double> p({1, H, W});
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            double acc = 0.0;
            for (std::size_t b = 0; b < B; ++b) acc += s[b] * h[(b * H + y) * W + x];
            p[y * W + x] = acc;
        }
    return p;
}

inline Tensor<double> spectral_t(const Tensor<double>& p, const std::vector<double>& s) {
    const std::size_t B = s.size(), H = p.dim(1), W = p.dim(2);
    Tensor<double> h({B, H, W});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < H * W; ++i) h[b * H * W + i] = s[b] * p[i];
    return h;
}

}  // namespace oracle
