#include <doctest/doctest.h>

#include <cmath>

#include "pansharp/gp_classic.hpp"
#include "pansharp/image_ops.hpp"
#include "pansharp/metrics.hpp"
#include "support/oracles.hpp"

using namespace pansharp;

namespace {

// 8x8 HRMS, r = 2, random normalized 3x3 blur, random spectral weights.
struct SmallProblem {
    DegradationSpec spec;
    Tensor<double> h, lrms, pan;
    std::vector<std::vector<double>> A;  // dense DK, 16 x 64

    explicit SmallProblem(std::uint64_t seed, std::size_t bands = 3) {
        spec.blur = oracle::random_tensor({3, 3}, seed, 0.0, 1.0);
        const double s = sum_value(spec.blur);
        for (double& v : spec.blur.data()) v /= s;
        spec.ratio = 2;
        const auto w = oracle::random_tensor({bands}, seed + 1, 0.1, 1.0);
        double ws = sum_value(w);
        for (double v : w.data()) spec.spectral.push_back(v / ws);
        h = oracle::random_tensor({bands, 8, 8}, seed + 2, 0.0, 1.0);
        lrms = oracle::random_tensor({bands, 4, 4}, seed + 3, 0.0, 1.0);
        pan = oracle::random_tensor({1, 8, 8}, seed + 4, 0.0, 1.0);
        A = oracle::blur_decimate_matrix(spec.blur, 8, 8, 2);
    }

    Tensor<double> dense_grad_f(const Tensor<double>& x) const {
        const auto l_hat = oracle::per_band(A, x, 4, 4);
        Tensor<double> res(lrms.shape());
        for (std::size_t i = 0; i < res.size(); ++i) res[i] = lrms[i] - l_hat[i];
        auto g = oracle::per_band(A, res, 8, 8, true);
        for (double& v : g.data()) v = -v;
        return g;
    }

    Tensor<double> dense_grad_g(const Tensor<double>& x) const {
        const auto p_hat = oracle::spectral(x, spec.spectral);
        Tensor<double> res(pan.shape());
        for (std::size_t i = 0; i < res.size(); ++i) res[i] = pan[i] - p_hat[i];
        auto g = oracle::spectral_t(res, spec.spectral);
        for (double& v : g.data()) v = -v;
        return g;
    }

    GPConfig config(double rho, Prox prox = Prox::identity) const {
        GPConfig c;
        c.rho = rho;
        c.prox = prox;
        c.spec = spec;
        return c;
    }
};

Tensor<double> step_reference(const Tensor<double>& h, const Tensor<double>& g, double rho, Prox prox) {
    Tensor<double> out(h.shape());
    for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] - rho * g[i];
    if (prox == Prox::nonneg_clip)
        for (double& v : out.data()) v = std::max(v, 0.0);
    return out;
}

// A consistent pair: lrms and pan generated from h by the exact operators.
void make_consistent(SmallProblem& p) {
    p.lrms = apply_blur_downsample(p.h, p.spec);
    p.pan = apply_spectral_response(p.h, p.spec);
}

}  // namespace

TEST_CASE("prox operators") {
    const Tensor<double> x({3}, std::vector<double>{-1, 0, 2});
    CHECK(apply_prox(x, Prox::identity) == x);
    CHECK(apply_prox(x, Prox::nonneg_clip) == Tensor<double>({3}, std::vector<double>{0, 0, 2}));
}

TEST_CASE("config validation") {
    GPConfig c;
    c.spec = default_spec(4);
    CHECK_NOTHROW(c.validate());
    c.rho = -0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.rho = 0.5;
    c.iterations = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("grad f") {
    SmallProblem p(10);
    SUBCASE("matches the dense matrix") {
        CHECK(oracle::max_abs_diff(grad_f(p.h, p.lrms, p.spec), p.dense_grad_f(p.h)) < 1e-12);
    }
    SUBCASE("zero at an exact solution") {
        make_consistent(p);
        for (double v : grad_f(p.h, p.lrms, p.spec).data()) CHECK(std::abs(v) < 1e-14);
    }
    SUBCASE("matches finite differences of the fidelity") {
        const auto g = grad_f(p.h, p.lrms, p.spec);
        const double eps = 1e-6;
        double max_err = 0.0, max_g = 0.0;
        for (std::size_t i = 0; i < p.h.size(); ++i) {
            auto hp = p.h, hm = p.h;
            hp[i] += eps;
            hm[i] -= eps;
            const double n = (fidelity_f(hp, p.lrms, p.spec) - fidelity_f(hm, p.lrms, p.spec)) / (2 * eps);
            max_err = std::max(max_err, std::abs(n - g[i]));
            max_g = std::max(max_g, std::abs(g[i]));
        }
        CHECK(max_err / max_g < 1e-6);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(grad_f(p.h, Tensor<double>({3, 3, 4}), p.spec), ShapeError);
    }
}

TEST_CASE("grad g") {
    SmallProblem p(20);
    SUBCASE("matches the dense computation") {
        CHECK(oracle::max_abs_diff(grad_g(p.h, p.pan, p.spec), p.dense_grad_g(p.h)) < 1e-14);
    }
    SUBCASE("zero at an exact solution") {
        make_consistent(p);
        for (double v : grad_g(p.h, p.pan, p.spec).data()) CHECK(std::abs(v) < 1e-15);
    }
    SUBCASE("one-hot weights touch one band") {
        p.spec.spectral = {0.0, 1.0, 0.0};
        const auto g = grad_g(p.h, p.pan, p.spec);
        for (std::size_t i = 0; i < 64; ++i) {
            CHECK(g[i] == 0.0);
            CHECK(g[128 + i] == 0.0);
        }
        double band1 = 0.0;
        for (std::size_t i = 64; i < 128; ++i) band1 += std::abs(g[i]);
        CHECK(band1 > 0.0);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(grad_g(p.h, Tensor<double>({1, 8, 7}), p.spec), ShapeError);
    }
}

TEST_CASE("gradient projection steps") {
    SmallProblem p(30);
    for (Prox prox : {Prox::identity, Prox::nonneg_clip}) {
        const auto cfg = p.config(0.7, prox);
        CHECK(oracle::max_abs_diff(gp_step_ms(p.h, p.lrms, cfg), step_reference(p.h, p.dense_grad_f(p.h), 0.7, prox)) <
              1e-12);
        CHECK(oracle::max_abs_diff(gp_step_pan(p.h, p.pan, cfg), step_reference(p.h, p.dense_grad_g(p.h), 0.7, prox)) <
              1e-12);
        auto gsum = p.dense_grad_f(p.h);
        const auto gg = p.dense_grad_g(p.h);
        for (std::size_t i = 0; i < gsum.size(); ++i) gsum[i] += gg[i];
        CHECK(oracle::max_abs_diff(fused_gp_step(p.h, p.lrms, p.pan, cfg), step_reference(p.h, gsum, 0.7, prox)) <
              1e-12);
    }

    SUBCASE("the four-step split equals prox(H - rho grad) exactly") {
        const auto cfg = p.config(0.3);
        const auto gf = grad_f(p.h, p.lrms, p.spec);
        const auto gg = grad_g(p.h, p.pan, p.spec);
        CHECK(gp_step_ms(p.h, p.lrms, cfg) == step_reference(p.h, gf, 0.3, Prox::identity));
        CHECK(gp_step_pan(p.h, p.pan, cfg) == step_reference(p.h, gg, 0.3, Prox::identity));
    }
    SUBCASE("rho = 0 returns H") {
        const auto cfg = p.config(0.0);
        CHECK(gp_step_ms(p.h, p.lrms, cfg) == p.h);
        CHECK(gp_step_pan(p.h, p.pan, cfg) == p.h);
        CHECK(fused_gp_step(p.h, p.lrms, p.pan, cfg) == p.h);
    }
    SUBCASE("an exact solution is a fixed point") {
        make_consistent(p);
        const auto cfg = p.config(0.8);
        CHECK(oracle::max_abs_diff(gp_step_ms(p.h, p.lrms, cfg), p.h) < 1e-14);
        CHECK(oracle::max_abs_diff(gp_step_pan(p.h, p.pan, cfg), p.h) < 1e-14);
        CHECK(oracle::max_abs_diff(fused_gp_step(p.h, p.lrms, p.pan, cfg), p.h) < 1e-14);
    }
}

TEST_CASE("descent below the inverse Lipschitz constant") {
    SmallProblem p(40);
    // Largest eigenvalue of (DK)^T DK by power iteration on the dense matrix.
    std::vector<double> v(64, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
        auto w = oracle::matvec_t(p.A, oracle::matvec(p.A, v));
        double n = 0.0;
        for (double x : w) n += x * x;
        n = std::sqrt(n);
        lambda = n;
        for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / n;
    }
    double s2 = 0.0;
    for (double w : p.spec.spectral) s2 += w * w;
    const double rho_f = 0.99 / lambda, rho_g = 0.99 / s2;

    auto h = p.h;
    for (int it = 0; it < 20; ++it) {
        const double before = fidelity_f(h, p.lrms, p.spec);
        h = gp_step_ms(h, p.lrms, p.config(rho_f));
        CHECK(fidelity_f(h, p.lrms, p.spec) <= before + 1e-15);
    }
    h = p.h;
    for (int it = 0; it < 20; ++it) {
        const double before = fidelity_g(h, p.pan, p.spec);
        h = gp_step_pan(h, p.pan, p.config(rho_g));
        CHECK(fidelity_g(h, p.pan, p.spec) <= before + 1e-15);
    }
}

TEST_CASE("solver") {
    const auto spec = default_spec(4);
    const auto scene = synthesize_scene(12, 64, 64, spec);
    const auto lrms = scene.lrms.cast<double>(), pan = scene.pan.cast<double>(), gt = scene.hrms.cast<double>();
    GPConfig cfg;
    cfg.rho = 0.5;
    cfg.iterations = 50;
    cfg.spec = spec;

    SUBCASE("fidelity is non-increasing and the result beats bicubic") {
        const auto res = solve(lrms, pan, cfg);
        REQUIRE(res.f_trace.size() == 51);
        for (std::size_t i = 1; i < res.f_trace.size(); ++i)
            CHECK(res.f_trace[i] + res.g_trace[i] <= res.f_trace[i - 1] + res.g_trace[i - 1]);
        CHECK(psnr(res.image, gt) > psnr(bicubic_upsample(lrms, 4), gt));
    }
    SUBCASE("exact initialization stays put") {
        const auto res = solve_from(gt, apply_blur_downsample(gt, spec), apply_spectral_response(gt, spec), cfg);
        for (std::size_t i = 0; i < res.f_trace.size(); ++i) {
            CHECK(res.f_trace[i] < 1e-20);
            CHECK(res.g_trace[i] < 1e-20);
        }
        CHECK(oracle::max_abs_diff(res.image, gt) < 1e-12);
    }
    SUBCASE("a step size far too large diverges with a diagnostic") {
        cfg.rho = 100.0;
        try {
            solve(lrms, pan, cfg);
            FAIL("expected divergence");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("smaller rho") != std::string::npos);
        }
    }
}
