#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pansharp/dataset.hpp"
#include "pansharp/network.hpp"

namespace pansharp {

struct TrainOptions {
    std::size_t epochs = 100;
    double lr = 5e-4;
    std::size_t batch = 16;
    // Ground-truth patch side; the image is tiled without overlap.
    std::size_t patch = 32;
    std::uint64_t seed = 0;
};

struct EpochReport {
    std::size_t epoch = 0;      // 1-based
    double train_loss = 0.0;    // mean l1 over the epoch's patches
    double val_psnr = 0.0;      // NaN when there is no validation split
};

struct TrainResult {
    NetworkWeights<float> best;  // weights at the best validation PSNR
    std::vector<EpochReport> history;
    std::size_t best_epoch = 0;
};

// One normalized training example: LRMS and GT share the LRMS divisor, PAN has its own.
struct TrainingPatch {
    Tensor<float> lrms;
    Tensor<float> pan;
    Tensor<float> gt;
};

std::vector<TrainingPatch> make_patches(const std::vector<Sample>& samples, std::size_t ratio, std::size_t patch);

// Minibatch Adam on the mean l1 loss. The network is initialized from
// cfg.seed; shuffling uses options.seed. Throws NumericError on a non-finite loss.
TrainResult train(const Dataset& data, const NetworkConfig& cfg, const TrainOptions& options,
                  const std::function<void(const EpochReport&)>& on_epoch = {});

// Normalizes the inputs, runs the network and maps the result back to the
// LRMS scale, clipped to [0, 1]. lrms: [B, m, n], pan: [1, M, N].
Tensor<float> fuse_network(const NetworkWeights<float>& weights, const Tensor<float>& lrms, const Tensor<float>& pan);

// Mean PSNR of fuse_network over a split.
double mean_psnr(const NetworkWeights<float>& weights, const std::vector<Sample>& samples);

}  // namespace pansharp
