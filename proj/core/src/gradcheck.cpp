#include "pansharp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pansharp/image_ops.hpp"
#include "pansharp/network.hpp"

namespace pansharp {

GradCheckResult finite_diff_check(const std::string& name, const std::function<Var<double>()>& loss,
                                  const std::vector<Var<double>>& inputs, double eps, double tol,
                                  const std::optional<Coordinates>& coords) {
    for (const auto& v : inputs) v.zero_grad();
    backward(loss());
    std::vector<Tensor<double>> analytic;
    for (const auto& v : inputs) analytic.push_back(v.grad());

    Coordinates probes;
    if (coords) {
        probes = *coords;
    } else {
        for (std::size_t i = 0; i < inputs.size(); ++i)
            for (std::size_t e = 0; e < inputs[i].value().size(); ++e) probes.emplace_back(i, e);
    }

    // Sampled coordinates are measured together as one vector.
    const std::size_t groups = coords ? 1 : inputs.size();
    std::vector<double> max_diff(groups, 0.0), max_a(groups, 0.0), max_n(groups, 0.0);
    for (const auto& [i, e] : probes) {
        Var<double> v = inputs.at(i);
        double& x = v.mutable_value()[e];
        const double saved = x;
        x = saved + eps;
        const double up = loss().value()[0];
        x = saved - eps;
        const double down = loss().value()[0];
        x = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[i][e];
        const std::size_t g = coords ? 0 : i;
        max_diff[g] = std::max(max_diff[g], std::abs(a - numeric));
        max_a[g] = std::max(max_a[g], std::abs(a));
        max_n[g] = std::max(max_n[g], std::abs(numeric));
    }

    GradCheckResult r;
    r.name = name;
    r.tolerance = tol;
    for (std::size_t g = 0; g < groups; ++g) {
        const double rel = max_diff[g] / std::max({max_a[g], max_n[g], 1e-12});
        r.rel_errors.push_back(rel);
        r.max_rel_error = std::max(r.max_rel_error, rel);
    }
    r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error < tol;
    return r;
}

namespace {

struct Sampler {
    std::mt19937_64 rng;

    Tensor<double> uniform(Shape shape, double lo = -1.0, double hi = 1.0) {
        std::uniform_real_distribution<double> d(lo, hi);
        Tensor<double> t(std::move(shape));
        for (double& v : t.data()) v = d(rng);
        return t;
    }

    // Values with magnitude in [0.1, 1], random sign: far from the ReLU and l1 kinks.
    Tensor<double> away_from_zero(Shape shape) {
        std::uniform_real_distribution<double> mag(0.1, 1.0);
        std::bernoulli_distribution sign(0.5);
        Tensor<double> t(std::move(shape));
        for (double& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
        return t;
    }

    Var<double> param(Shape shape) { return Var<double>::parameter(uniform(std::move(shape))); }
};

// Projection onto fixed random weights turns any op into a scalar loss with a generic gradient.
std::function<Var<double>()> projected(std::function<Var<double>()> op, Sampler& s) {
    const Tensor<double> weights = s.uniform(op().shape());
    return [op = std::move(op), weights] { return weighted_sum(op(), weights); };
}

Coordinates random_coords(const std::vector<Var<double>>& inputs, std::size_t n, std::mt19937_64& rng) {
    std::size_t total = 0;
    for (const auto& v : inputs) total += v.value().size();
    std::vector<std::size_t> flat(total);
    for (std::size_t i = 0; i < total; ++i) flat[i] = i;
    std::shuffle(flat.begin(), flat.end(), rng);
    flat.resize(std::min(n, total));
    std::sort(flat.begin(), flat.end());
    Coordinates out;
    for (std::size_t f : flat) {
        std::size_t i = 0;
        while (f >= inputs[i].value().size()) f -= inputs[i++].value().size();
        out.emplace_back(i, f);
    }
    return out;
}

}  // namespace

std::vector<GradCheckResult> gradcheck_suite(std::uint64_t seed) {
    Sampler s{std::mt19937_64(seed)};
    std::vector<GradCheckResult> out;

    {
        auto x = s.param({1, 2, 5, 5}), w = s.param({3, 2, 3, 3}), b = s.param({3});
        const ConvKernel<double> k(w, b);
        out.push_back(finite_diff_check("conv2d", projected([=] { return conv2d(x, k); }, s), {x, w, b}));
    }
    {
        auto x = Var<double>::parameter(s.away_from_zero({1, 2, 4, 4}));
        out.push_back(finite_diff_check("relu", projected([=] { return relu(x); }, s), {x}));
    }
    {
        auto x = s.param({1, 2, 4, 4});
        out.push_back(finite_diff_check("bicubic_up", projected([=] { return bicubic_upsample(x, 2); }, s), {x}));
    }
    {
        auto x = s.param({1, 2, 8, 8});
        out.push_back(finite_diff_check("bicubic_down", projected([=] { return bicubic_downsample(x, 2); }, s), {x}));
    }
    {
        auto x = s.param({1, 2, 5, 5});
        auto w1 = s.param({4, 2, 3, 3}), b1 = s.param({4}), w2 = s.param({2, 4, 3, 3}), b2 = s.param({2});
        const ConvKernel<double> k1(w1, b1), k2(w2, b2);
        out.push_back(finite_diff_check("conv_block", projected([=] { return conv_block(x, k1, k2); }, s),
                                        {x, w1, b1, w2, b2}));
    }
    {
        auto x = s.param({1, 2, 4, 4});
        auto w = s.param({2, 3, 3, 3}), b = s.param({3});
        const auto op = [=] { return conv2d(x, ConvKernel<double>(rotate_transpose(w), b)); };
        out.push_back(finite_diff_check("rotate_transpose", projected(op, s), {x, w, b}));
    }
    {
        auto a = s.param({2, 3}), b = s.param({2, 3}), c = s.param({1});
        out.push_back(finite_diff_check(
            "add_sub_scale", projected([=] { return scale_by(c, sub(add(a, b), scalar_mul(b, 3.0))); }, s),
            {a, b, c}));
    }
    {
        auto target = s.uniform({1, 2, 4, 4});
        auto offset = s.away_from_zero({1, 2, 4, 4});
        Tensor<double> pred_v(target.shape());
        for (std::size_t i = 0; i < pred_v.size(); ++i) pred_v[i] = target[i] + offset[i];
        auto pred = Var<double>::parameter(std::move(pred_v));
        auto tgt = Var<double>::parameter(target);
        out.push_back(finite_diff_check("l1_loss", [=] { return l1_loss(pred, tgt); }, {pred, tgt}));
    }

    NetworkConfig cfg;
    cfg.layers = 1;
    cfg.width = 4;
    cfg.bands = 2;
    cfg.ratio = 2;
    {
        auto w = init_weights<double>(cfg, seed);
        const auto ms = w.layers[0].ms;
        auto h = s.param({1, 2, 8, 8}), l = s.param({1, 2, 4, 4});
        std::vector<Var<double>> inputs = {h, l};
        for (auto& prm : w.parameters()) inputs.push_back(prm);
        out.push_back(finite_diff_check("ms_block", projected([=] { return ms_block_forward(h, l, ms); }, s), inputs));
    }
    {
        auto w = init_weights<double>(cfg, seed + 1);
        const auto pan = w.layers[0].pan;
        auto h = s.param({1, 2, 8, 8}), p = s.param({1, 1, 8, 8});
        std::vector<Var<double>> inputs = {h, p};
        for (auto& prm : w.parameters()) inputs.push_back(prm);
        out.push_back(finite_diff_check("pan_block", projected([=] { return pan_block_forward(h, p, pan); }, s), inputs));
    }

    // End to end: K = 1, C = 4, 8x8 output, l1 loss against a random target,
    // checked on 20 randomly chosen weights.
    cfg.bands = 4;
    cfg.ratio = 4;
    for (Ablation a : {Ablation::none, Ablation::no_prox, Ablation::shared_weights, Ablation::fused_block,
                       Ablation::transposed_kernels}) {
        cfg.ablation = a;
        auto w = init_weights<double>(cfg, seed + 2);
        // Zero biases put ReLUs exactly on their kink wherever a feature map is
        // zero; a generic point avoids that.
        for (auto& [pname, v] : w.named_parameters()) {
            if (pname.ends_with(".bias")) v.mutable_value() = s.uniform(v.shape(), -0.1, 0.1);
            if (pname.ends_with(".rho")) v.mutable_value() = s.uniform(v.shape(), 0.2, 0.5);
        }
        const auto l = Var<double>::constant(s.uniform({1, 4, 2, 2}, 0.0, 1.0));
        const auto p = Var<double>::constant(s.uniform({1, 1, 8, 8}, 0.0, 1.0));
        const auto gt = Var<double>::constant(s.uniform({1, 4, 8, 8}, 0.0, 1.0));
        const auto params = w.parameters();
        const Coordinates coords = random_coords(params, 20, s.rng);
        const std::string name = a == Ablation::none ? "network" : "network_" + to_string(a);
        out.push_back(finite_diff_check(name, [=] { return l1_loss(forward(l, p, w), gt); }, params, 1e-6, 1e-4,
                                        coords));
    }
    return out;
}

}  // namespace pansharp
