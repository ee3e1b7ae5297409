#include <random>

#include <benchmark/benchmark.h>

#include "pansharp/autodiff.hpp"
#include "pansharp/image_ops.hpp"
#include "pansharp/network.hpp"

using namespace pansharp;

namespace {

Tensor<float> random(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    Tensor<float> t(std::move(shape));
    for (float& v : t.data()) v = d(rng);
    return t;
}

// Batch 16 of 32x32 patches, the training shape of the desk configuration.
void BM_Conv2dForward(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto x = random({16, c, 32, 32}, 1), w = random({c, c, 3, 3}, 2), b = random({c}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_forward(x, w, b));
}
BENCHMARK(BM_Conv2dForward)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Conv2dGradInput(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto gy = random({16, c, 32, 32}, 1), w = random({c, c, 3, 3}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_grad_input(gy, w));
}
BENCHMARK(BM_Conv2dGradInput)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Conv2dGradWeight(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto x = random({16, c, 32, 32}, 1), gy = random({16, c, 32, 32}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::conv2d_grad_weight(x, gy, 3));
}
BENCHMARK(BM_Conv2dGradWeight)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_BicubicUpsample(benchmark::State& state) {
    const auto x = random({16, 4, 8, 8}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(bicubic_upsample(x, 4));
}
BENCHMARK(BM_BicubicUpsample)->Unit(benchmark::kMicrosecond);

void BM_BicubicDownsample(benchmark::State& state) {
    const auto x = random({16, 4, 32, 32}, 5);
    for (auto _ : state) benchmark::DoNotOptimize(bicubic_downsample(x, 4));
}
BENCHMARK(BM_BicubicDownsample)->Unit(benchmark::kMicrosecond);

NetworkConfig desk_config() {
    NetworkConfig cfg;
    cfg.layers = 4;
    cfg.width = 16;
    cfg.bands = 4;
    cfg.ratio = 4;
    return cfg;
}

void BM_NetworkForward(benchmark::State& state) {
    const auto w = init_weights<float>(desk_config(), 1);
    const auto lrms = Var<float>::constant(random({16, 4, 8, 8}, 6));
    const auto pan = Var<float>::constant(random({16, 1, 32, 32}, 7));
    for (auto _ : state) benchmark::DoNotOptimize(forward(lrms, pan, w));
}
BENCHMARK(BM_NetworkForward)->Unit(benchmark::kMillisecond);

void BM_NetworkTrainingStep(benchmark::State& state) {
    const auto w = init_weights<float>(desk_config(), 1);
    const auto lrms = Var<float>::constant(random({16, 4, 8, 8}, 6));
    const auto pan = Var<float>::constant(random({16, 1, 32, 32}, 7));
    const auto gt = Var<float>::constant(random({16, 4, 32, 32}, 8));
    for (auto _ : state) {
        const auto loss = l1_loss(forward(lrms, pan, w), gt);
        backward(loss);
        for (auto& p : w.parameters()) p.zero_grad();
    }
}
BENCHMARK(BM_NetworkTrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
