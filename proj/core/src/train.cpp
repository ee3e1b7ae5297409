#include "pansharp/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pansharp/adam.hpp"
#include "pansharp/metrics.hpp"

namespace pansharp {

std::vector<TrainingPatch> make_patches(const std::vector<Sample>& samples, std::size_t ratio, std::size_t patch) {
    std::vector<TrainingPatch> out;
    for (const auto& s : samples) {
        const std::size_t H = s.gt.dim(1), W = s.gt.dim(2);
        const std::size_t ph = std::min(patch, H), pw = std::min(patch, W);
        if (ph % ratio != 0 || pw % ratio != 0)
            throw std::invalid_argument("patch size " + std::to_string(ph) + "x" + std::to_string(pw) +
                                        " is not divisible by ratio " + std::to_string(ratio));
        for (std::size_t y = 0; y + ph <= H; y += ph)
            for (std::size_t x = 0; x + pw <= W; x += pw) {
                const Normalized<float> ms = normalize(crop(s.lrms, y / ratio, x / ratio, ph / ratio, pw / ratio));
                const Normalized<float> pan = normalize(crop(s.pan, y, x, ph, pw));
                Tensor<float> gt = crop(s.gt, y, x, ph, pw);
                for (float& v : gt.data()) v /= ms.divisor;
                out.push_back({ms.image, pan.image, std::move(gt)});
            }
    }
    return out;
}

Tensor<float> fuse_network(const NetworkWeights<float>& weights, const Tensor<float>& lrms, const Tensor<float>& pan) {
    const Normalized<float> ms = normalize(lrms);
    const Normalized<float> p = normalize(pan);
    const auto l = Var<float>::constant(ms.image.reshaped({1, lrms.dim(0), lrms.dim(1), lrms.dim(2)}));
    const auto pv = Var<float>::constant(p.image.reshaped({1, 1, pan.dim(1), pan.dim(2)}));
    const Var<float> out = forward(l, pv, weights);
    Tensor<float> image = unstack(out.value(), 0);
    for (float& v : image.data()) v = std::clamp(v * ms.divisor, 0.0f, 1.0f);
    return image;
}

double mean_psnr(const NetworkWeights<float>& weights, const std::vector<Sample>& samples) {
    if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (const auto& s : samples)
        total += psnr(fuse_network(weights, s.lrms, s.pan).cast<double>(), s.gt.cast<double>());
    return total / static_cast<double>(samples.size());
}

TrainResult train(const Dataset& data, const NetworkConfig& cfg, const TrainOptions& options,
                  const std::function<void(const EpochReport&)>& on_epoch) {
    cfg.validate();
    if (cfg.ratio != data.spec.ratio || cfg.bands != data.spec.bands())
        throw std::invalid_argument("network ratio/bands (" + std::to_string(cfg.ratio) + "/" +
                                    std::to_string(cfg.bands) + ") do not match the dataset (" +
                                    std::to_string(data.spec.ratio) + "/" + std::to_string(data.spec.bands()) + ")");
    if (data.train.empty()) throw std::invalid_argument("training split is empty");
    if (options.batch == 0) throw std::invalid_argument("batch size must be positive");

    const std::vector<TrainingPatch> patches = make_patches(data.train, cfg.ratio, options.patch);
    NetworkWeights<float> weights = init_weights<float>(cfg, cfg.seed);
    std::vector<Var<float>> params = weights.parameters();
    AdamState<float> adam(AdamOptions{.lr = options.lr}, params);
    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(patches.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    double best_psnr = -std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += options.batch) {
            const std::size_t n = std::min(options.batch, order.size() - start);
            std::vector<Tensor<float>> l, p, g;
            for (std::size_t i = 0; i < n; ++i) {
                const TrainingPatch& tp = patches[order[start + i]];
                l.push_back(tp.lrms);
                p.push_back(tp.pan);
                g.push_back(tp.gt);
            }
            const auto lrms = Var<float>::constant(stack<float>(l));
            const auto pan = Var<float>::constant(stack<float>(p));
            const auto gt = Var<float>::constant(stack<float>(g));
            for (auto& prm : params) prm.zero_grad();
            const Var<float> loss = l1_loss(forward(lrms, pan, weights), gt);
            const double value = loss.value()[0];
            if (!std::isfinite(value)) {
                std::ostringstream os;
                os << "training loss became " << value << " at epoch " << epoch << ", batch " << start / options.batch
                   << "; lower the learning rate (lr = " << options.lr << ") or change the initialization seed";
                throw NumericError(os.str());
            }
            backward(loss);
            adam_step(params, adam);
            loss_sum += value * static_cast<double>(n);
        }
        EpochReport report;
        report.epoch = epoch;
        report.train_loss = loss_sum / static_cast<double>(patches.size());
        report.val_psnr = mean_psnr(weights, data.val);
        result.history.push_back(report);
        const bool no_val = std::isnan(report.val_psnr);
        if (no_val || report.val_psnr > best_psnr || result.best_epoch == 0) {
            if (!no_val) best_psnr = report.val_psnr;
            result.best = weights.clone();
            result.best_epoch = epoch;
        }
        if (on_epoch) on_epoch(report);
    }
    if (result.best_epoch == 0) result.best = weights.clone();
    return result;
}

}  // namespace pansharp
