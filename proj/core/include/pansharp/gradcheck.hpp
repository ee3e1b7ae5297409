#pragma once

// Central finite-difference verification of the reverse-mode gradients.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pansharp/autodiff.hpp"

namespace pansharp {

struct GradCheckResult {
    std::string name;
    // max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf, 1e-12), per
    // input, or a single entry over all probed coordinates when they are given.
    std::vector<double> rel_errors;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// (input index, flat element index) pairs to probe.
using Coordinates = std::vector<std::pair<std::size_t, std::size_t>>;

// `loss` must rebuild the graph from the current values of `inputs` on every
// call. Inputs are perturbed in place and restored. All elements are probed
// unless `coords` is given.
GradCheckResult finite_diff_check(const std::string& name, const std::function<Var<double>()>& loss,
                                  const std::vector<Var<double>>& inputs, double eps = 1e-6, double tol = 1e-5,
                                  const std::optional<Coordinates>& coords = std::nullopt);

// Every differentiable op plus the blocks and a K = 1 network, at fixed random points.
std::vector<GradCheckResult> gradcheck_suite(std::uint64_t seed = 7);

}  // namespace pansharp
