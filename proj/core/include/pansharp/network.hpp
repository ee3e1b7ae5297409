#pragma once

// Gradient-projection pan-sharpening network.
//
// Each of the K layers runs an MS block then a PAN block:
//
//   MS block:  L^  = bicubic_down(conv_block(H; down))
//              R_h = rho * bicubic_up(conv_block(L - L^; up))
//              H'  = conv_block(H + R_h; prox)
//
//   PAN block: P^  = conv_block(H; reduce)            (1x1 kernels)
//              R_h = rho * conv_block(P - P^; expand) (1x1 kernels)
//              H'  = conv_block(H + R_h; prox)
//
// The start estimate is the bicubic-upsampled LRMS. Tensors are batches
// [N, C, H, W]; the network never sees the ground truth.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pansharp/image_ops.hpp"

namespace pansharp {

enum class Ablation { none, no_prox, shared_weights, fused_block, transposed_kernels };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

struct NetworkConfig {
    std::size_t layers = 8;
    std::size_t width = 64;
    std::size_t k_lr = 3;
    std::size_t k_pan = 1;
    std::size_t ratio = 4;
    std::size_t bands = 4;
    Ablation ablation = Ablation::none;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

template <typename T>
struct ConvBlockWeights {
    ConvKernel<T> first;
    ConvKernel<T> second;
};

template <typename T>
struct MSBlockWeights {
    ConvBlockWeights<T> down;
    // With tied kernels only the up biases are stored; the weights are
    // derived from `down` on every forward pass.
    ConvBlockWeights<T> up;
    bool tied = false;
    std::optional<ConvBlockWeights<T>> prox;
    Var<T> rho;

    ConvBlockWeights<T> up_kernels() const;
};

template <typename T>
struct PANBlockWeights {
    ConvBlockWeights<T> reduce;
    ConvBlockWeights<T> expand;
    bool tied = false;
    std::optional<ConvBlockWeights<T>> prox;
    Var<T> rho;

    ConvBlockWeights<T> expand_kernels() const;
};

// One layer. Under the fused_block ablation the MS prox is the single shared
// prox of the layer and pan.prox is empty.
template <typename T>
struct LayerWeights {
    MSBlockWeights<T> ms;
    PANBlockWeights<T> pan;
};

template <typename T>
struct NetworkWeights {
    NetworkConfig config;
    std::vector<LayerWeights<T>> layers;  // one entry under shared_weights

    // Stable names ("layer0.ms.down.first.weight", ...) in a fixed order.
    std::vector<std::pair<std::string, Var<T>>> named_parameters() const;
    std::vector<Var<T>> parameters() const;
    std::size_t parameter_count() const;
    const LayerWeights<T>& layer(std::size_t k) const;

    NetworkWeights clone() const;
    template <typename U>
    NetworkWeights<U> cast() const;
};

// Uniform(-sqrt(3/fan_in), sqrt(3/fan_in)) weights (variance 1/fan_in), zero
// biases, rho = 0.1. Deterministic per seed.
template <typename T>
NetworkWeights<T> init_weights(const NetworkConfig& cfg, std::uint64_t seed);

template <typename T>
Var<T> ms_block_forward(const Var<T>& h, const Var<T>& lrms, const MSBlockWeights<T>& w);
template <typename T>
Var<T> pan_block_forward(const Var<T>& h, const Var<T>& pan, const PANBlockWeights<T>& w);
// Both residual branches computed from H, summed, one shared prox.
template <typename T>
Var<T> fused_block_forward(const Var<T>& h, const Var<T>& lrms, const Var<T>& pan, const LayerWeights<T>& w);

template <typename T>
Var<T> forward(const Var<T>& lrms, const Var<T>& pan, const NetworkWeights<T>& weights);

// Hand-set weights that make the blocks reproduce classical steps. Every
// lift splits a signal into its positive and negative parts (+x, -x) before
// the ReLU and recombines them after, so the cascades are exactly linear.
// Requires width >= 2 * bands.
namespace analytic {

// conv_block that returns its input unchanged.
template <typename T>
ConvBlockWeights<T> identity_block(std::size_t channels, std::size_t width, std::size_t kernel);
// conv_block computing correlation of every band with `kernel` (odd k x k).
template <typename T>
ConvBlockWeights<T> band_filter_block(std::size_t bands, std::size_t width, const Tensor<double>& kernel);
// 1x1 conv_block computing sum_b spectral[b] x_b.
template <typename T>
ConvBlockWeights<T> spectral_reduce_block(const std::vector<double>& spectral, std::size_t width);
// 1x1 conv_block computing spectral[b] * p for every band b.
template <typename T>
ConvBlockWeights<T> spectral_expand_block(const std::vector<double>& spectral, std::size_t width);

// down = blur, up = 180-degree rotated blur, identity prox.
template <typename T>
MSBlockWeights<T> ms_block(const Tensor<double>& blur, std::size_t bands, std::size_t width, std::size_t k_lr, T rho);
// reduce = S, expand = S^T, identity prox.
template <typename T>
PANBlockWeights<T> pan_block(const std::vector<double>& spectral, std::size_t width, std::size_t k_lr, T rho);

}  // namespace analytic

// Closed-form parameter count for a configuration.
std::size_t expected_parameter_count(const NetworkConfig& cfg);

// Checkpoint directory: one .ten file per named parameter plus config.json.
void save_checkpoint(const std::string& dir, const NetworkWeights<float>& w);
NetworkWeights<float> load_checkpoint(const std::string& dir);

}  // namespace pansharp
