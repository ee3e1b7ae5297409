#include "pansharp/image_ops.hpp"

#include <algorithm>
#include <cmath>

namespace pansharp {

template <typename T>
ConvKernel<T>::ConvKernel(Var<T> w, Var<T> b) : weight(std::move(w)), bias(std::move(b)) {
    const Shape& ws = weight.shape();
    if (ws.size() != 4 || ws[2] != ws[3])
        throw ShapeError("conv kernel must be [out,in,k,k], got " + shape_str(ws));
    if (ws[2] % 2 == 0) throw ShapeError("conv kernel size must be odd, got " + std::to_string(ws[2]));
    if (bias.shape() != Shape{ws[0]})
        throw ShapeError("conv bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(ws));
}

namespace kernels {

namespace {

// Valid output range along one axis for tap offset `d` = tap - pad.
inline void valid_range(std::ptrdiff_t d, std::size_t n, std::size_t& lo, std::size_t& hi) {
    const auto sn = static_cast<std::ptrdiff_t>(n);
    lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -d));
    hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(sn - d, 0, sn));
}

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
    // Eight independent partial sums let the compiler vectorize without
    // reassociating a single accumulator; the order is fixed, so results are
    // reproducible.
    T acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    T tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::size_t N = x.dim(0), CI = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t CO = w.dim(0), K = w.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(K / 2);
    Tensor<T> y({N, CO, H, W});
    const T* xd = x.data().data();
    const T* wd = w.data().data();
    T* yd = y.data().data();
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t co = 0; co < CO; ++co) {
            T* yp = yd + (n * CO + co) * H * W;
            std::fill(yp, yp + H * W, b[co]);
            for (std::size_t ci = 0; ci < CI; ++ci) {
                const T* xp = xd + (n * CI + ci) * H * W;
                const T* wk = wd + (co * CI + ci) * K * K;
                for (std::size_t ky = 0; ky < K; ++ky) {
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                    std::size_t y0, y1;
                    valid_range(dy, H, y0, y1);
                    for (std::size_t kx = 0; kx < K; ++kx) {
                        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                        std::size_t x0, x1;
                        valid_range(dx, W, x0, x1);
                        const T wv = wk[ky * K + kx];
                        if (wv == T(0)) continue;
                        for (std::size_t yy = y0; yy < y1; ++yy) {
                            T* out = yp + yy * W;
                            const T* in = xp + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(yy) + dy) * W + dx;
                            for (std::size_t xx = x0; xx < x1; ++xx) out[xx] += wv * in[xx];
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> conv2d_grad_input(const Tensor<T>& gy, const Tensor<T>& w) {
    const std::size_t N = gy.dim(0), CO = gy.dim(1), H = gy.dim(2), W = gy.dim(3);
    const std::size_t CI = w.dim(1), K = w.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(K / 2);
    Tensor<T> gx({N, CI, H, W});
    const T* gyd = gy.data().data();
    const T* wd = w.data().data();
    T* gxd = gx.data().data();
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t ci = 0; ci < CI; ++ci) {
            T* gxp = gxd + (n * CI + ci) * H * W;
            for (std::size_t co = 0; co < CO; ++co) {
                const T* gyp = gyd + (n * CO + co) * H * W;
                const T* wk = wd + (co * CI + ci) * K * K;
                for (std::size_t ky = 0; ky < K; ++ky) {
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                    std::size_t y0, y1;
                    valid_range(dy, H, y0, y1);
                    for (std::size_t kx = 0; kx < K; ++kx) {
                        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                        std::size_t x0, x1;
                        valid_range(dx, W, x0, x1);
                        const T wv = wk[ky * K + kx];
                        if (wv == T(0)) continue;
                        for (std::size_t yy = y0; yy < y1; ++yy) {
                            const T* src = gyp + yy * W;
                            T* dst = gxp + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(yy) + dy) * W + dx;
                            for (std::size_t xx = x0; xx < x1; ++xx) dst[xx] += wv * src[xx];
                        }
                    }
                }
            }
        }
    }
    return gx;
}

template <typename T>
Tensor<T> conv2d_grad_weight(const Tensor<T>& x, const Tensor<T>& gy, std::size_t K) {
    const std::size_t N = x.dim(0), CI = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t CO = gy.dim(1);
    const auto pad = static_cast<std::ptrdiff_t>(K / 2);
    Tensor<T> gw({CO, CI, K, K});
    const T* xd = x.data().data();
    const T* gyd = gy.data().data();
    T* gwd = gw.data().data();
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t co = 0; co < CO; ++co) {
            const T* gyp = gyd + (n * CO + co) * H * W;
            for (std::size_t ci = 0; ci < CI; ++ci) {
                const T* xp = xd + (n * CI + ci) * H * W;
                T* gk = gwd + (co * CI + ci) * K * K;
                for (std::size_t ky = 0; ky < K; ++ky) {
                    const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
                    std::size_t y0, y1;
                    valid_range(dy, H, y0, y1);
                    for (std::size_t kx = 0; kx < K; ++kx) {
                        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
                        std::size_t x0, x1;
                        valid_range(dx, W, x0, x1);
                        if (x1 <= x0) continue;
                        T acc = 0;
                        for (std::size_t yy = y0; yy < y1; ++yy) {
                            const T* g = gyp + yy * W + x0;
                            const T* in = xp + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(yy) + dy) * W +
                                          static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x0) + dx);
                            acc += dot(g, in, x1 - x0);
                        }
                        gk[ky * K + kx] += acc;
                    }
                }
            }
        }
    }
    return gw;
}

}  // namespace kernels

template <typename T>
Var<T> conv2d(const Var<T>& x, const ConvKernel<T>& k) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(xs));
    if (xs[1] != k.in_channels())
        throw ShapeError("conv2d: input has " + std::to_string(xs[1]) + " channels, kernel expects " +
                         std::to_string(k.in_channels()) + " (kernel " + shape_str(k.weight.shape()) + ")");
    Tensor<T> y = kernels::conv2d_forward(x.value(), k.weight.value(), k.bias.value());
    return Var<T>::from_op(std::move(y), {x, k.weight, k.bias}, [](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        Node<T>& wn = *self.parents[1];
        Node<T>& bn = *self.parents[2];
        const Tensor<T>& g = self.grad;
        if (xn.requires_grad) xn.accumulate(kernels::conv2d_grad_input(g, wn.value));
        if (wn.requires_grad) wn.accumulate(kernels::conv2d_grad_weight(xn.value, g, wn.value.dim(2)));
        if (bn.requires_grad) {
            const std::size_t N = g.dim(0), C = g.dim(1), HW = g.dim(2) * g.dim(3);
            Tensor<T> gb({C});
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < C; ++c) {
                    const T* p = g.data().data() + (n * C + c) * HW;
                    T acc = 0;
                    for (std::size_t i = 0; i < HW; ++i) acc += p[i];
                    gb[c] += acc;
                }
            bn.accumulate(gb);
        }
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> y = x.value();
    for (T& v : y.data()) v = v > T(0) ? v : T(0);
    return Var<T>::from_op(std::move(y), {x}, [](Node<T>& self) {
        Node<T>& xn = *self.parents[0];
        Tensor<T> g = self.grad;
        auto gv = g.data();
        auto xv = xn.value.data();
        for (std::size_t i = 0; i < gv.size(); ++i)
            if (!(xv[i] > T(0))) gv[i] = T(0);
        xn.accumulate(g);
    });
}

template <typename T>
Var<T> conv_block(const Var<T>& x, const ConvKernel<T>& first, const ConvKernel<T>& second) {
    if (first.out_channels() != second.in_channels())
        throw ShapeError("conv_block: first kernel outputs " + std::to_string(first.out_channels()) +
                         " channels but second expects " + std::to_string(second.in_channels()));
    return conv2d(relu(conv2d(x, first)), second);
}

template <typename T>
Tensor<T> rotate_transpose(const Tensor<T>& w) {
    if (w.rank() != 4 || w.dim(2) != w.dim(3))
        throw ShapeError("rotate_transpose: expected [out,in,k,k], got " + shape_str(w.shape()));
    const std::size_t O = w.dim(0), I = w.dim(1), K = w.dim(2);
    Tensor<T> r({I, O, K, K});
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t ky = 0; ky < K; ++ky)
                for (std::size_t kx = 0; kx < K; ++kx) r.at(i, o, K - 1 - ky, K - 1 - kx) = w.at(o, i, ky, kx);
    return r;
}

template <typename T>
Var<T> rotate_transpose(const Var<T>& weight) {
    return Var<T>::from_op(rotate_transpose(weight.value()), {weight}, [](Node<T>& self) {
        // The map is an involution, so its adjoint is itself.
        self.parents[0]->accumulate(rotate_transpose(self.grad));
    });
}

double cubic_weight(double distance) {
    constexpr double a = -0.5;
    const double x = std::abs(distance);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

AxisResampler::AxisResampler(std::size_t in_size, std::size_t out_size) : in(in_size), out(out_size) {
    if (in_size == 0 || out_size == 0) throw ShapeError("bicubic resize: zero-sized axis");
    taps.resize(out);
    weights.resize(out);
    const double inv_scale = static_cast<double>(in) / static_cast<double>(out);
    const auto last = static_cast<std::ptrdiff_t>(in) - 1;
    for (std::size_t d = 0; d < out; ++d) {
        const double src = (static_cast<double>(d) + 0.5) * inv_scale - 0.5;
        const double base = std::floor(src);
        const double t = src - base;
        const auto i0 = static_cast<std::ptrdiff_t>(base);
        for (int j = 0; j < 4; ++j) {
            taps[d][j] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i0 - 1 + j, 0, last));
            weights[d][j] = cubic_weight(t - static_cast<double>(j - 1));
        }
    }
}

namespace {

// Applies `rs` along the last axis of a [planes, rows, in] view.
template <typename T>
void resample_rows(const T* src, T* dst, std::size_t rows, const AxisResampler& rs) {
    for (std::size_t r = 0; r < rows; ++r) {
        const T* s = src + r * rs.in;
        T* o = dst + r * rs.out;
        for (std::size_t d = 0; d < rs.out; ++d) {
            const auto& tp = rs.taps[d];
            const auto& w = rs.weights[d];
            o[d] = static_cast<T>(w[0] * s[tp[0]] + w[1] * s[tp[1]] + w[2] * s[tp[2]] + w[3] * s[tp[3]]);
        }
    }
}

template <typename T>
void resample_rows_adjoint(const T* g, T* dst, std::size_t rows, const AxisResampler& rs) {
    for (std::size_t r = 0; r < rows; ++r) {
        const T* s = g + r * rs.out;
        T* o = dst + r * rs.in;
        for (std::size_t d = 0; d < rs.out; ++d)
            for (int j = 0; j < 4; ++j) o[rs.taps[d][j]] += static_cast<T>(rs.weights[d][j] * s[d]);
    }
}

// Along the row axis of one [in_rows, W] plane.
template <typename T>
void resample_cols(const T* src, T* dst, std::size_t W, const AxisResampler& rs) {
    for (std::size_t d = 0; d < rs.out; ++d) {
        const auto& tp = rs.taps[d];
        const auto& w = rs.weights[d];
        const T* r0 = src + tp[0] * W;
        const T* r1 = src + tp[1] * W;
        const T* r2 = src + tp[2] * W;
        const T* r3 = src + tp[3] * W;
        T* o = dst + d * W;
        const T w0 = static_cast<T>(w[0]), w1 = static_cast<T>(w[1]), w2 = static_cast<T>(w[2]),
                w3 = static_cast<T>(w[3]);
        for (std::size_t x = 0; x < W; ++x) o[x] = w0 * r0[x] + w1 * r1[x] + w2 * r2[x] + w3 * r3[x];
    }
}

template <typename T>
void resample_cols_adjoint(const T* g, T* dst, std::size_t W, const AxisResampler& rs) {
    for (std::size_t d = 0; d < rs.out; ++d) {
        const T* s = g + d * W;
        for (int j = 0; j < 4; ++j) {
            const T w = static_cast<T>(rs.weights[d][j]);
            T* o = dst + rs.taps[d][j] * W;
            for (std::size_t x = 0; x < W; ++x) o[x] += w * s[x];
        }
    }
}

Shape with_spatial(const Shape& s, std::size_t h, std::size_t w) {
    Shape out = s;
    out[out.size() - 2] = h;
    out[out.size() - 1] = w;
    return out;
}

}  // namespace

template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
    if (x.rank() < 2) throw ShapeError("bicubic resize needs rank >= 2, got " + shape_str(x.shape()));
    const std::size_t H = x.height(), W = x.width();
    const std::size_t planes = x.size() / (H * W);
    const AxisResampler rx(W, out_w), ry(H, out_h);
    Tensor<T> tmp({planes, H, out_w});
    resample_rows(x.data().data(), tmp.data().data(), planes * H, rx);
    Tensor<T> y(with_spatial(x.shape(), out_h, out_w));
    for (std::size_t p = 0; p < planes; ++p)
        resample_cols(tmp.data().data() + p * H * out_w, y.data().data() + p * out_h * out_w, out_w, ry);
    return y;
}

template <typename T>
Tensor<T> bicubic_resize_adjoint(const Tensor<T>& g, std::size_t in_h, std::size_t in_w) {
    if (g.rank() < 2) throw ShapeError("bicubic resize needs rank >= 2, got " + shape_str(g.shape()));
    const std::size_t OH = g.height(), OW = g.width();
    const std::size_t planes = g.size() / (OH * OW);
    const AxisResampler rx(in_w, OW), ry(in_h, OH);
    Tensor<T> tmp({planes, in_h, OW});
    for (std::size_t p = 0; p < planes; ++p)
        resample_cols_adjoint(g.data().data() + p * OH * OW, tmp.data().data() + p * in_h * OW, OW, ry);
    Tensor<T> x(with_spatial(g.shape(), in_h, in_w));
    resample_rows_adjoint(tmp.data().data(), x.data().data(), planes * in_h, rx);
    return x;
}

template <typename T>
Tensor<T> bicubic_upsample(const Tensor<T>& x, std::size_t ratio) {
    if (ratio == 0) throw ShapeError("bicubic upsample: ratio must be positive");
    return bicubic_resize(x, x.height() * ratio, x.width() * ratio);
}

namespace {

void check_downsample(const Shape& s, std::size_t ratio) {
    if (ratio == 0) throw ShapeError("bicubic downsample: ratio must be positive");
    if (s.size() < 2 || s[s.size() - 2] % ratio != 0 || s[s.size() - 1] % ratio != 0)
        throw ShapeError("bicubic downsample: spatial size of " + shape_str(s) + " not divisible by " +
                         std::to_string(ratio));
}

}  // namespace

template <typename T>
Tensor<T> bicubic_downsample(const Tensor<T>& x, std::size_t ratio) {
    check_downsample(x.shape(), ratio);
    return bicubic_resize(x, x.height() / ratio, x.width() / ratio);
}

template <typename T>
Var<T> bicubic_resize(const Var<T>& x, std::size_t out_h, std::size_t out_w) {
    const std::size_t in_h = x.value().height(), in_w = x.value().width();
    return Var<T>::from_op(bicubic_resize(x.value(), out_h, out_w), {x}, [in_h, in_w](Node<T>& self) {
        self.parents[0]->accumulate(bicubic_resize_adjoint(self.grad, in_h, in_w));
    });
}

template <typename T>
Var<T> bicubic_upsample(const Var<T>& x, std::size_t ratio) {
    if (ratio == 0) throw ShapeError("bicubic upsample: ratio must be positive");
    return bicubic_resize(x, x.value().height() * ratio, x.value().width() * ratio);
}

template <typename T>
Var<T> bicubic_downsample(const Var<T>& x, std::size_t ratio) {
    check_downsample(x.shape(), ratio);
    return bicubic_resize(x, x.value().height() / ratio, x.value().width() / ratio);
}

#define PANSHARP_INSTANTIATE(T)                                                                     \
    template struct ConvKernel<T>;                                                                  \
    template Var<T> conv2d<T>(const Var<T>&, const ConvKernel<T>&);                                 \
    template Var<T> relu<T>(const Var<T>&);                                                         \
    template Var<T> conv_block<T>(const Var<T>&, const ConvKernel<T>&, const ConvKernel<T>&);       \
    template Var<T> rotate_transpose<T>(const Var<T>&);                                             \
    template Tensor<T> rotate_transpose<T>(const Tensor<T>&);                                       \
    template Tensor<T> bicubic_resize<T>(const Tensor<T>&, std::size_t, std::size_t);               \
    template Tensor<T> bicubic_resize_adjoint<T>(const Tensor<T>&, std::size_t, std::size_t);       \
    template Tensor<T> bicubic_upsample<T>(const Tensor<T>&, std::size_t);                          \
    template Tensor<T> bicubic_downsample<T>(const Tensor<T>&, std::size_t);                        \
    template Var<T> bicubic_resize<T>(const Var<T>&, std::size_t, std::size_t);                     \
    template Var<T> bicubic_upsample<T>(const Var<T>&, std::size_t);                                \
    template Var<T> bicubic_downsample<T>(const Var<T>&, std::size_t);                              \
    template Tensor<T> kernels::conv2d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template Tensor<T> kernels::conv2d_grad_input<T>(const Tensor<T>&, const Tensor<T>&);           \
    template Tensor<T> kernels::conv2d_grad_weight<T>(const Tensor<T>&, const Tensor<T>&, std::size_t);

PANSHARP_INSTANTIATE(float)
PANSHARP_INSTANTIATE(double)
#undef PANSHARP_INSTANTIATE

}  // namespace pansharp
