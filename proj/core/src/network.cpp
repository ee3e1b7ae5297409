#include "pansharp/network.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

namespace pansharp {

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_prox: return "no_prox";
        case Ablation::shared_weights: return "shared_weights";
        case Ablation::fused_block: return "fused_block";
        case Ablation::transposed_kernels: return "transposed_kernels";
    }
    return "none";
}

Ablation ablation_from_string(const std::string& s) {
    for (Ablation a : {Ablation::none, Ablation::no_prox, Ablation::shared_weights, Ablation::fused_block,
                       Ablation::transposed_kernels})
        if (to_string(a) == s) return a;
    throw std::invalid_argument("unknown ablation '" + s +
                                "' (expected none, no_prox, shared_weights, fused_block, transposed_kernels)");
}

void NetworkConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("layers K must be >= 1");
    if (width < 1) throw std::invalid_argument("width C must be >= 1");
    if (k_lr % 2 == 0) throw std::invalid_argument("k_lr must be odd, got " + std::to_string(k_lr));
    if (k_pan != 1) throw std::invalid_argument("k_pan must be 1, got " + std::to_string(k_pan));
    if (ratio < 1) throw std::invalid_argument("ratio must be >= 1");
    if (bands < 1) throw std::invalid_argument("bands must be >= 1");
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
    j = nlohmann::json{{"layers", c.layers}, {"width", c.width},   {"k_lr", c.k_lr},
                       {"k_pan", c.k_pan},   {"ratio", c.ratio},   {"bands", c.bands},
                       {"ablation", to_string(c.ablation)},        {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
    NetworkConfig d;
    c.layers = j.value("layers", d.layers);
    c.width = j.value("width", d.width);
    c.k_lr = j.value("k_lr", d.k_lr);
    c.k_pan = j.value("k_pan", d.k_pan);
    c.ratio = j.value("ratio", d.ratio);
    c.bands = j.value("bands", d.bands);
    c.ablation = ablation_from_string(j.value("ablation", std::string("none")));
    c.seed = j.value("seed", d.seed);
}

template <typename T>
ConvBlockWeights<T> MSBlockWeights<T>::up_kernels() const {
    if (!tied) return up;
    return {ConvKernel<T>(rotate_transpose(down.second.weight), up.first.bias),
            ConvKernel<T>(rotate_transpose(down.first.weight), up.second.bias)};
}

template <typename T>
ConvBlockWeights<T> PANBlockWeights<T>::expand_kernels() const {
    if (!tied) return expand;
    return {ConvKernel<T>(rotate_transpose(reduce.second.weight), expand.first.bias),
            ConvKernel<T>(rotate_transpose(reduce.first.weight), expand.second.bias)};
}

namespace {

template <typename T>
void push_kernel(std::vector<std::pair<std::string, Var<T>>>& out, const std::string& name, const ConvKernel<T>& k,
                 bool with_weight = true) {
    if (with_weight) out.emplace_back(name + ".weight", k.weight);
    out.emplace_back(name + ".bias", k.bias);
}

template <typename T>
void push_block(std::vector<std::pair<std::string, Var<T>>>& out, const std::string& name,
                const ConvBlockWeights<T>& b, bool with_weight = true) {
    push_kernel(out, name + ".first", b.first, with_weight);
    push_kernel(out, name + ".second", b.second, with_weight);
}

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Var<T>>> NetworkWeights<T>::named_parameters() const {
    std::vector<std::pair<std::string, Var<T>>> out;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const std::string p = "layer" + std::to_string(k);
        const auto& l = layers[k];
        push_block(out, p + ".ms.down", l.ms.down);
        push_block(out, p + ".ms.up", l.ms.up, !l.ms.tied);
        if (l.ms.prox) push_block(out, p + ".ms.prox", *l.ms.prox);
        out.emplace_back(p + ".ms.rho", l.ms.rho);
        push_block(out, p + ".pan.reduce", l.pan.reduce);
        push_block(out, p + ".pan.expand", l.pan.expand, !l.pan.tied);
        if (l.pan.prox) push_block(out, p + ".pan.prox", *l.pan.prox);
        out.emplace_back(p + ".pan.rho", l.pan.rho);
    }
    return out;
}

template <typename T>
std::vector<Var<T>> NetworkWeights<T>::parameters() const {
    std::vector<Var<T>> out;
    for (auto& [name, v] : named_parameters()) out.push_back(v);
    return out;
}

template <typename T>
std::size_t NetworkWeights<T>::parameter_count() const {
    std::size_t n = 0;
    for (auto& [name, v] : named_parameters()) n += v.value().size();
    return n;
}

template <typename T>
const LayerWeights<T>& NetworkWeights<T>::layer(std::size_t k) const {
    return config.ablation == Ablation::shared_weights ? layers.at(0) : layers.at(k);
}

namespace {

template <typename U, typename T>
ConvKernel<U> cast_kernel(const ConvKernel<T>& k) {
    ConvKernel<U> out;
    if (k.weight.defined()) out.weight = Var<U>::parameter(k.weight.value().template cast<U>());
    out.bias = Var<U>::parameter(k.bias.value().template cast<U>());
    return out;
}

template <typename U, typename T>
ConvBlockWeights<U> cast_block(const ConvBlockWeights<T>& b) {
    return {cast_kernel<U>(b.first), cast_kernel<U>(b.second)};
}

template <typename U, typename T>
std::optional<ConvBlockWeights<U>> cast_block(const std::optional<ConvBlockWeights<T>>& b) {
    if (!b) return std::nullopt;
    return cast_block<U>(*b);
}

}  // namespace

template <typename T>
template <typename U>
NetworkWeights<U> NetworkWeights<T>::cast() const {
    NetworkWeights<U> out;
    out.config = config;
    for (const auto& l : layers) {
        LayerWeights<U> c;
        c.ms.down = cast_block<U>(l.ms.down);
        c.ms.up = cast_block<U>(l.ms.up);
        c.ms.tied = l.ms.tied;
        c.ms.prox = cast_block<U>(l.ms.prox);
        c.ms.rho = Var<U>::parameter(l.ms.rho.value().template cast<U>());
        c.pan.reduce = cast_block<U>(l.pan.reduce);
        c.pan.expand = cast_block<U>(l.pan.expand);
        c.pan.tied = l.pan.tied;
        c.pan.prox = cast_block<U>(l.pan.prox);
        c.pan.rho = Var<U>::parameter(l.pan.rho.value().template cast<U>());
        out.layers.push_back(std::move(c));
    }
    return out;
}

template <typename T>
NetworkWeights<T> NetworkWeights<T>::clone() const {
    return cast<T>();
}

namespace {

template <typename T>
struct Initializer {
    std::mt19937_64 rng;

    ConvKernel<T> kernel(std::size_t out, std::size_t in, std::size_t k, bool with_weight = true) {
        ConvKernel<T> kern;
        kern.bias = Var<T>::parameter(Tensor<T>({out}));
        if (!with_weight) return kern;
        // Variance 1 / fan_in.
        const double bound = std::sqrt(3.0 / static_cast<double>(in * k * k));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor<T> w({out, in, k, k});
        for (T& v : w.data()) v = static_cast<T>(dist(rng));
        return ConvKernel<T>(Var<T>::parameter(std::move(w)), kern.bias);
    }

    ConvBlockWeights<T> block(std::size_t in, std::size_t mid, std::size_t out, std::size_t k, bool with_weight = true) {
        auto first = kernel(mid, in, k, with_weight);
        auto second = kernel(out, mid, k, with_weight);
        return {std::move(first), std::move(second)};
    }
};

}  // namespace

template <typename T>
NetworkWeights<T> init_weights(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    NetworkWeights<T> w;
    w.config = cfg;
    Initializer<T> init{std::mt19937_64(seed)};
    const std::size_t B = cfg.bands, C = cfg.width, k = cfg.k_lr, kp = cfg.k_pan;
    const bool tied = cfg.ablation == Ablation::transposed_kernels;
    const bool ms_prox = cfg.ablation != Ablation::no_prox;
    const bool pan_prox = ms_prox && cfg.ablation != Ablation::fused_block;
    const std::size_t stored = cfg.ablation == Ablation::shared_weights ? 1 : cfg.layers;
    for (std::size_t l = 0; l < stored; ++l) {
        LayerWeights<T> layer;
        layer.ms.down = init.block(B, C, B, k);
        layer.ms.up = init.block(B, C, B, k, !tied);
        layer.ms.tied = tied;
        if (ms_prox) layer.ms.prox = init.block(B, C, B, k);
        layer.ms.rho = Var<T>::parameter(Tensor<T>({1}, T(0.1)));
        layer.pan.reduce = init.block(B, C, 1, kp);
        layer.pan.expand = init.block(1, C, B, kp, !tied);
        layer.pan.tied = tied;
        if (pan_prox) layer.pan.prox = init.block(B, C, B, k);
        layer.pan.rho = Var<T>::parameter(Tensor<T>({1}, T(0.1)));
        w.layers.push_back(std::move(layer));
    }
    return w;
}

std::size_t expected_parameter_count(const NetworkConfig& cfg) {
    const std::size_t B = cfg.bands, C = cfg.width, k2 = cfg.k_lr * cfg.k_lr, kp2 = cfg.k_pan * cfg.k_pan;
    auto block = [C](std::size_t in, std::size_t out, std::size_t ksq) { return C * in * ksq + C + out * C * ksq + out; };
    const bool tied = cfg.ablation == Ablation::transposed_kernels;
    const bool ms_prox = cfg.ablation != Ablation::no_prox;
    const bool pan_prox = ms_prox && cfg.ablation != Ablation::fused_block;
    const std::size_t ms = block(B, B, k2) + (tied ? C + B : block(B, B, k2)) + (ms_prox ? block(B, B, k2) : 0) + 1;
    const std::size_t pan = block(B, 1, kp2) + (tied ? C + B : block(1, B, kp2)) + (pan_prox ? block(B, B, k2) : 0) + 1;
    const std::size_t stored = cfg.ablation == Ablation::shared_weights ? 1 : cfg.layers;
    return stored * (ms + pan);
}

namespace {

template <typename T>
Var<T> maybe_prox(const Var<T>& x, const std::optional<ConvBlockWeights<T>>& prox) {
    if (!prox) return x;
    return conv_block(x, prox->first, prox->second);
}

template <typename T>
void check_ms_inputs(const Var<T>& h, const Var<T>& lrms) {
    const Shape& hs = h.shape();
    const Shape& ls = lrms.shape();
    if (hs.size() != 4 || ls.size() != 4 || hs[0] != ls[0] || hs[1] != ls[1] || ls[2] == 0 || ls[3] == 0 ||
        hs[2] % ls[2] != 0 || hs[3] % ls[3] != 0 || hs[2] / ls[2] != hs[3] / ls[3])
        throw ShapeError("MS block: HRMS " + shape_str(hs) + " and LRMS " + shape_str(ls) +
                         " do not differ by one integer ratio");
}

template <typename T>
void check_pan_inputs(const Var<T>& h, const Var<T>& pan) {
    const Shape& hs = h.shape();
    const Shape& ps = pan.shape();
    if (hs.size() != 4 || ps.size() != 4 || hs[0] != ps[0] || hs[2] != ps[2] || hs[3] != ps[3])
        throw ShapeError("PAN block: HRMS " + shape_str(hs) + " and PAN " + shape_str(ps) + " differ in size");
}

template <typename T>
Var<T> ms_residual(const Var<T>& h, const Var<T>& lrms, const MSBlockWeights<T>& w) {
    check_ms_inputs(h, lrms);
    const std::size_t r = h.shape()[2] / lrms.shape()[2];
    const Var<T> l_hat = bicubic_downsample(conv_block(h, w.down.first, w.down.second), r);
    const Var<T> r_l = sub(lrms, l_hat);
    const auto up = w.up_kernels();
    return scale_by(w.rho, bicubic_upsample(conv_block(r_l, up.first, up.second), r));
}

template <typename T>
Var<T> pan_residual(const Var<T>& h, const Var<T>& pan, const PANBlockWeights<T>& w) {
    check_pan_inputs(h, pan);
    const Var<T> p_hat = conv_block(h, w.reduce.first, w.reduce.second);
    const Var<T> r_p = sub(pan, p_hat);
    const auto ex = w.expand_kernels();
    return scale_by(w.rho, conv_block(r_p, ex.first, ex.second));
}

}  // namespace

template <typename T>
Var<T> ms_block_forward(const Var<T>& h, const Var<T>& lrms, const MSBlockWeights<T>& w) {
    return maybe_prox(add(h, ms_residual(h, lrms, w)), w.prox);
}

template <typename T>
Var<T> pan_block_forward(const Var<T>& h, const Var<T>& pan, const PANBlockWeights<T>& w) {
    return maybe_prox(add(h, pan_residual(h, pan, w)), w.prox);
}

template <typename T>
Var<T> fused_block_forward(const Var<T>& h, const Var<T>& lrms, const Var<T>& pan, const LayerWeights<T>& w) {
    const Var<T> sum_r = add(ms_residual(h, lrms, w.ms), pan_residual(h, pan, w.pan));
    return maybe_prox(add(h, sum_r), w.ms.prox);
}

template <typename T>
Var<T> forward(const Var<T>& lrms, const Var<T>& pan, const NetworkWeights<T>& weights) {
    const NetworkConfig& cfg = weights.config;
    const Shape& ls = lrms.shape();
    const Shape& ps = pan.shape();
    if (ls.size() != 4 || ps.size() != 4 || ls[1] != cfg.bands || ps[1] != 1 || ps[0] != ls[0] ||
        ps[2] != ls[2] * cfg.ratio || ps[3] != ls[3] * cfg.ratio)
        throw ShapeError("forward: LRMS " + shape_str(ls) + " and PAN " + shape_str(ps) +
                         " do not match the network (bands " + std::to_string(cfg.bands) + ", ratio " +
                         std::to_string(cfg.ratio) + ")");
    const std::size_t expected_layers = cfg.ablation == Ablation::shared_weights ? 1 : cfg.layers;
    if (weights.layers.size() != expected_layers)
        throw ShapeError("forward: weights hold " + std::to_string(weights.layers.size()) + " layers, config needs " +
                         std::to_string(expected_layers));
    Var<T> h = bicubic_upsample(lrms, cfg.ratio);
    for (std::size_t t = 0; t < cfg.layers; ++t) {
        const LayerWeights<T>& lw = weights.layer(t);
        if (cfg.ablation == Ablation::fused_block) {
            h = fused_block_forward(h, lrms, pan, lw);
        } else {
            h = ms_block_forward(h, lrms, lw.ms);
            h = pan_block_forward(h, pan, lw.pan);
        }
    }
    return h;
}

namespace analytic {

namespace {

template <typename T>
ConvKernel<T> make_kernel(Tensor<T> w) {
    const std::size_t out = w.dim(0);
    return ConvKernel<T>(Var<T>::parameter(std::move(w)), Var<T>::parameter(Tensor<T>({out})));
}

void require_width(std::size_t width, std::size_t channels) {
    if (width < 2 * channels)
        throw std::invalid_argument("analytic weights need width >= " + std::to_string(2 * channels) + ", got " +
                                    std::to_string(width));
}

}  // namespace

template <typename T>
ConvBlockWeights<T> identity_block(std::size_t channels, std::size_t width, std::size_t kernel) {
    require_width(width, channels);
    const std::size_t c = kernel / 2;
    Tensor<T> w1({width, channels, kernel, kernel});
    Tensor<T> w2({channels, width, kernel, kernel});
    for (std::size_t b = 0; b < channels; ++b) {
        w1.at(2 * b, b, c, c) = T(1);
        w1.at(2 * b + 1, b, c, c) = T(-1);
        w2.at(b, 2 * b, c, c) = T(1);
        w2.at(b, 2 * b + 1, c, c) = T(-1);
    }
    return {make_kernel(std::move(w1)), make_kernel(std::move(w2))};
}

template <typename T>
ConvBlockWeights<T> band_filter_block(std::size_t bands, std::size_t width, const Tensor<double>& kernel) {
    require_width(width, bands);
    const std::size_t K = kernel.dim(0), c = K / 2;
    Tensor<T> w1({width, bands, K, K});
    Tensor<T> w2({bands, width, K, K});
    for (std::size_t b = 0; b < bands; ++b) {
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) {
                w1.at(2 * b, b, i, j) = static_cast<T>(kernel[i * K + j]);
                w1.at(2 * b + 1, b, i, j) = static_cast<T>(-kernel[i * K + j]);
            }
        w2.at(b, 2 * b, c, c) = T(1);
        w2.at(b, 2 * b + 1, c, c) = T(-1);
    }
    return {make_kernel(std::move(w1)), make_kernel(std::move(w2))};
}

template <typename T>
ConvBlockWeights<T> spectral_reduce_block(const std::vector<double>& spectral, std::size_t width) {
    require_width(width, 1);
    const std::size_t B = spectral.size();
    Tensor<T> w1({width, B, 1, 1});
    Tensor<T> w2({1, width, 1, 1});
    for (std::size_t b = 0; b < B; ++b) {
        w1.at(0, b, 0, 0) = static_cast<T>(spectral[b]);
        w1.at(1, b, 0, 0) = static_cast<T>(-spectral[b]);
    }
    w2.at(0, 0, 0, 0) = T(1);
    w2.at(0, 1, 0, 0) = T(-1);
    return {make_kernel(std::move(w1)), make_kernel(std::move(w2))};
}

template <typename T>
ConvBlockWeights<T> spectral_expand_block(const std::vector<double>& spectral, std::size_t width) {
    require_width(width, 1);
    const std::size_t B = spectral.size();
    Tensor<T> w1({width, 1, 1, 1});
    Tensor<T> w2({B, width, 1, 1});
    w1.at(0, 0, 0, 0) = T(1);
    w1.at(1, 0, 0, 0) = T(-1);
    for (std::size_t b = 0; b < B; ++b) {
        w2.at(b, 0, 0, 0) = static_cast<T>(spectral[b]);
        w2.at(b, 1, 0, 0) = static_cast<T>(-spectral[b]);
    }
    return {make_kernel(std::move(w1)), make_kernel(std::move(w2))};
}

template <typename T>
MSBlockWeights<T> ms_block(const Tensor<double>& blur, std::size_t bands, std::size_t width, std::size_t k_lr, T rho) {
    const std::size_t K = blur.dim(0);
    Tensor<double> flipped({K, K});
    for (std::size_t i = 0; i < K * K; ++i) flipped[i] = blur[K * K - 1 - i];
    MSBlockWeights<T> w;
    w.down = band_filter_block<T>(bands, width, blur);
    w.up = band_filter_block<T>(bands, width, flipped);
    w.prox = identity_block<T>(bands, width, k_lr);
    w.rho = Var<T>::parameter(Tensor<T>({1}, rho));
    return w;
}

template <typename T>
PANBlockWeights<T> pan_block(const std::vector<double>& spectral, std::size_t width, std::size_t k_lr, T rho) {
    PANBlockWeights<T> w;
    w.reduce = spectral_reduce_block<T>(spectral, width);
    w.expand = spectral_expand_block<T>(spectral, width);
    w.prox = identity_block<T>(spectral.size(), width, k_lr);
    w.rho = Var<T>::parameter(Tensor<T>({1}, rho));
    return w;
}

}  // namespace analytic

void save_checkpoint(const std::string& dir, const NetworkWeights<float>& w) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());
    for (const auto& [name, v] : w.named_parameters()) save_ten(fs::path(dir) / (name + ".ten"), v.value());
    std::ofstream f(fs::path(dir) / "config.json");
    if (!f) throw IoError("cannot write " + dir + "/config.json");
    f << nlohmann::json(w.config).dump(2) << '\n';
}

NetworkWeights<float> load_checkpoint(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream f(fs::path(dir) / "config.json");
    if (!f) throw IoError("checkpoint " + dir + " has no config.json");
    NetworkConfig cfg;
    try {
        cfg = nlohmann::json::parse(f).get<NetworkConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad checkpoint config in " + dir + ": " + e.what());
    }
    NetworkWeights<float> w = init_weights<float>(cfg, cfg.seed);
    for (auto& [name, v] : w.named_parameters()) {
        Tensor<float> t = load_ten(fs::path(dir) / (name + ".ten"));
        if (t.shape() != v.shape())
            throw IoError("checkpoint tensor " + name + " has shape " + shape_str(t.shape()) + ", expected " +
                          shape_str(v.shape()));
        Var<float> handle = v;
        handle.mutable_value() = std::move(t);
    }
    return w;
}

#define PANSHARP_INSTANTIATE(T)                                                                                    \
    template ConvBlockWeights<T> MSBlockWeights<T>::up_kernels() const;                                            \
    template ConvBlockWeights<T> PANBlockWeights<T>::expand_kernels() const;                                       \
    template struct NetworkWeights<T>;                                                                             \
    template NetworkWeights<T> init_weights<T>(const NetworkConfig&, std::uint64_t);                               \
    template Var<T> ms_block_forward<T>(const Var<T>&, const Var<T>&, const MSBlockWeights<T>&);                   \
    template Var<T> pan_block_forward<T>(const Var<T>&, const Var<T>&, const PANBlockWeights<T>&);                 \
    template Var<T> fused_block_forward<T>(const Var<T>&, const Var<T>&, const Var<T>&, const LayerWeights<T>&);   \
    template Var<T> forward<T>(const Var<T>&, const Var<T>&, const NetworkWeights<T>&);                            \
    template ConvBlockWeights<T> analytic::identity_block<T>(std::size_t, std::size_t, std::size_t);               \
    template ConvBlockWeights<T> analytic::band_filter_block<T>(std::size_t, std::size_t, const Tensor<double>&);   \
    template ConvBlockWeights<T> analytic::spectral_reduce_block<T>(const std::vector<double>&, std::size_t);      \
    template ConvBlockWeights<T> analytic::spectral_expand_block<T>(const std::vector<double>&, std::size_t);      \
    template MSBlockWeights<T> analytic::ms_block<T>(const Tensor<double>&, std::size_t, std::size_t, std::size_t, T); \
    template PANBlockWeights<T> analytic::pan_block<T>(const std::vector<double>&, std::size_t, std::size_t, T);

PANSHARP_INSTANTIATE(float)
PANSHARP_INSTANTIATE(double)
#undef PANSHARP_INSTANTIATE

template NetworkWeights<double> NetworkWeights<float>::cast<double>() const;
template NetworkWeights<float> NetworkWeights<double>::cast<float>() const;

}  // namespace pansharp
