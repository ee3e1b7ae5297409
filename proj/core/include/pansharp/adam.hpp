#pragma once

#include <cstdint>
#include <vector>

#include "pansharp/autodiff.hpp"

namespace pansharp {

struct AdamOptions {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moment buffers, indexed in the order parameters are passed.
template <typename T>
struct AdamState {
    AdamOptions options;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::int64_t t = 0;

    AdamState() = default;
    AdamState(AdamOptions opts, const std::vector<Var<T>>& params);
};

// One bias-corrected Adam update of every parameter from its accumulated grad.
// Parameters that received no gradient are treated as having a zero gradient.
template <typename T>
void adam_step(std::vector<Var<T>>& params, AdamState<T>& state);

// Same update with explicit gradient tensors.
template <typename T>
void adam_step(std::vector<Var<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state);

}  // namespace pansharp
