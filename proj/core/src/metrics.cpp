#include "pansharp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace pansharp {

namespace {

void check_images(const Tensor<double>& x, const Tensor<double>& y, const char* what) {
    if (x.rank() != 3) throw ShapeError(std::string(what) + ": expected [bands,H,W], got " + shape_str(x.shape()));
    require_same_shape(x, y, what);
}

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_taps() {
    std::vector<double> g(kWindow);
    const double c = static_cast<double>(kWindow / 2);
    double s = 0.0;
    for (std::size_t i = 0; i < kWindow; ++i) {
        const double d = static_cast<double>(i) - c;
        g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        s += g[i];
    }
    for (double& v : g) v /= s;
    return g;
}

// Separable "valid" filtering of one H x W plane.
std::vector<double> filter_valid(const double* src, std::size_t H, std::size_t W, const std::vector<double>& g) {
    const std::size_t oh = H - kWindow + 1, ow = W - kWindow + 1;
    std::vector<double> tmp(H * ow);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * src[y * W + x + k];
            tmp[y * ow + x] = acc;
        }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * tmp[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    return out;
}

}  // namespace

double psnr(const Tensor<double>& x, const Tensor<double>& y) {
    require_same_shape(x, y, "psnr");
    if (x.empty()) throw ShapeError("psnr: empty images");
    double se = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(x.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor<double>& x, const Tensor<double>& y) {
    check_images(x, y, "ssim");
    const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H < kWindow || W < kWindow)
        throw ShapeError("ssim: images " + shape_str(x.shape()) + " are smaller than the 11x11 window");
    constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
    constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
    const auto g = gaussian_taps();
    double total = 0.0;
    std::size_t count = 0;
    std::vector<double> xx(H * W), yy(H * W), xy(H * W);
    for (std::size_t b = 0; b < B; ++b) {
        const double* xp = x.data().data() + b * H * W;
        const double* yp = y.data().data() + b * H * W;
        for (std::size_t i = 0; i < H * W; ++i) {
            xx[i] = xp[i] * xp[i];
            yy[i] = yp[i] * yp[i];
            xy[i] = xp[i] * yp[i];
        }
        const auto mx = filter_valid(xp, H, W, g);
        const auto my = filter_valid(yp, H, W, g);
        const auto sxx = filter_valid(xx.data(), H, W, g);
        const auto syy = filter_valid(yy.data(), H, W, g);
        const auto sxy = filter_valid(xy.data(), H, W, g);
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                     ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        count += mx.size();
    }
    return total / static_cast<double>(count);
}

double sam(const Tensor<double>& x, const Tensor<double>& y) {
    check_images(x, y, "sam");
    const std::size_t B = x.dim(0), P = x.dim(1) * x.dim(2);
    if (B < 2) throw ShapeError("sam: needs at least two bands, got " + shape_str(x.shape()));
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t p = 0; p < P; ++p) {
        double nx = 0.0, ny = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            nx += x[b * P + p] * x[b * P + p];
            ny += y[b * P + p] * y[b * P + p];
        }
        nx = std::sqrt(nx);
        ny = std::sqrt(ny);
        if (nx < 1e-8 || ny < 1e-8) continue;
        // 2 atan2(|u - v|, |u + v|) on unit vectors: exact 0 for parallel spectra,
        // no loss of precision near 0 or pi.
        double diff = 0.0, sum = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const double u = x[b * P + p] / nx, v = y[b * P + p] / ny;
            diff += (u - v) * (u - v);
            sum += (u + v) * (u + v);
        }
        total += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
        ++used;
    }
    if (used == 0) throw NumericError("sam: every pixel has a (near-)zero spectrum");
    return total / static_cast<double>(used);
}

double ergas(const Tensor<double>& x, const Tensor<double>& reference, double ratio) {
    check_images(x, reference, "ergas");
    if (!(ratio > 0.0)) throw std::invalid_argument("ergas: ratio must be positive");
    const std::size_t B = x.dim(0), P = x.dim(1) * x.dim(2);
    double acc = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double se = 0.0, mean = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            const double d = x[b * P + p] - reference[b * P + p];
            se += d * d;
            mean += reference[b * P + p];
        }
        mean /= static_cast<double>(P);
        if (std::abs(mean) <= 1e-8)
            throw NumericError("ergas: reference band " + std::to_string(b) + " has a near-zero mean");
        const double rmse = std::sqrt(se / static_cast<double>(P));
        acc += (rmse / mean) * (rmse / mean);
    }
    return (100.0 / ratio) * std::sqrt(acc / static_cast<double>(B));
}

MetricsReport evaluate(const Tensor<double>& fused, const Tensor<double>& reference, double ratio) {
    MetricsReport r;
    r.psnr = psnr(fused, reference);
    r.ssim = ssim(fused, reference);
    r.sam = sam(fused, reference);
    r.ergas = ergas(fused, reference, ratio);
    r.n_images = 1;
    r.n_psnr_infinite = std::isinf(r.psnr) ? 1 : 0;
    return r;
}

MetricsReport evaluate_set(std::span<const Tensor<double>> references, std::span<const Tensor<double>> fused,
                           double ratio) {
    if (references.size() != fused.size())
        throw ShapeError("evaluate_set: " + std::to_string(references.size()) + " references but " +
                         std::to_string(fused.size()) + " fused images");
    if (references.empty()) throw ShapeError("evaluate_set: no images");
    MetricsReport total;
    double psnr_sum = 0.0;
    for (std::size_t i = 0; i < fused.size(); ++i) {
        const MetricsReport one = evaluate(fused[i], references[i], ratio);
        if (one.n_psnr_infinite)
            ++total.n_psnr_infinite;
        else
            psnr_sum += one.psnr;
        total.ssim += one.ssim;
        total.sam += one.sam;
        total.ergas += one.ergas;
    }
    const double n = static_cast<double>(fused.size());
    total.n_images = fused.size();
    const std::size_t finite = total.n_images - total.n_psnr_infinite;
    total.psnr = finite ? psnr_sum / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
    total.ssim /= n;
    total.sam /= n;
    total.ergas /= n;
    return total;
}

std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace pansharp
