#include <doctest/doctest.h>

#include <filesystem>

#include "pansharp/network.hpp"
#include "pansharp/observation.hpp"
#include "support/references.hpp"

using namespace pansharp;

namespace {

using VarD = Var<double>;

NetworkConfig small_config(Ablation a = Ablation::none) {
    NetworkConfig c;
    c.layers = 3;
    c.width = 6;
    c.bands = 3;
    c.ratio = 2;
    c.ablation = a;
    return c;
}

}  // namespace

TEST_CASE("ms block with analytic weights is a gradient-projection step") {
    for (std::uint64_t i = 0; i < 10; ++i) {
        CAPTURE(i);
        const std::size_t B = 2 + i % 3, r = 2 + i % 3, m = 3 + i % 2;
        const auto blur = oracle::random_blur(i % 2 ? 5 : 3, 100 + i);
        const double rho = 0.2 + 0.07 * double(i);
        const auto h = oracle::random_tensor({2, B, r * m, r * m}, 200 + i, 0.0, 1.0);
        const auto l = oracle::random_tensor({2, B, m, m}, 300 + i, 0.0, 1.0);
        const auto w = analytic::ms_block<double>(blur, B, 2 * B + 1, 3, rho);
        const auto out = ms_block_forward(VarD::constant(h), VarD::constant(l), w);
        CHECK(oracle::max_abs_diff(out.value(), oracle::ms_reference(h, l, blur, rho)) < 1e-6);
    }
}

TEST_CASE("pan block with analytic weights is a gradient-projection step") {
    for (std::uint64_t i = 0; i < 10; ++i) {
        CAPTURE(i);
        const std::size_t B = 2 + i % 4, S = 4 + i;
        const auto s = oracle::random_spectral(B, 400 + i);
        const double rho = 0.3 + 0.05 * double(i);
        const auto h = oracle::random_tensor({2, B, S, S}, 500 + i, 0.0, 1.0);
        const auto p = oracle::random_tensor({2, 1, S, S}, 600 + i, 0.0, 1.0);
        const auto w = analytic::pan_block<double>(s, 2 * B, 3, rho);
        const auto out = pan_block_forward(VarD::constant(h), VarD::constant(p), w);
        CHECK(oracle::max_abs_diff(out.value(), oracle::pan_reference(h, p, s, rho)) < 1e-6);
    }
}

TEST_CASE("analytic building blocks") {
    const auto x = oracle::random_tensor({1, 3, 5, 5}, 1, -1.0, 1.0);
    SUBCASE("identity block passes signed input through") {
        const auto b = analytic::identity_block<double>(3, 6, 3);
        CHECK(oracle::max_abs_diff(conv_block(VarD::constant(x), b.first, b.second).value(), x) < 1e-15);
    }
    SUBCASE("band filter is a per-band correlation") {
        const auto k = oracle::random_blur(3, 2);
        const auto b = analytic::band_filter_block<double>(3, 7, k);
        const auto ref = oracle::conv2d(x, oracle::per_band_kernel(k, 3), Tensor<double>({3}));
        CHECK(oracle::max_abs_diff(conv_block(VarD::constant(x), b.first, b.second).value(), ref) < 1e-14);
    }
    SUBCASE("too narrow") {
        CHECK_THROWS_AS(analytic::identity_block<double>(3, 5, 3), std::invalid_argument);
    }
}

TEST_CASE("identity cases") {
    const std::size_t B = 3, r = 2;
    const auto blur = oracle::random_blur(3, 7);
    const auto s = oracle::random_spectral(B, 8);
    const auto h = oracle::random_tensor({1, B, 8, 8}, 9, 0.0, 1.0);
    SUBCASE("rho = 0") {
        const auto ms = analytic::ms_block<double>(blur, B, 6, 3, 0.0);
        const auto pan = analytic::pan_block<double>(s, 6, 3, 0.0);
        const auto l = oracle::random_tensor({1, B, 4, 4}, 10, 0.0, 1.0);
        const auto p = oracle::random_tensor({1, 1, 8, 8}, 11, 0.0, 1.0);
        CHECK(ms_block_forward(VarD::constant(h), VarD::constant(l), ms).value() == h);
        CHECK(pan_block_forward(VarD::constant(h), VarD::constant(p), pan).value() == h);
    }
    SUBCASE("observations generated by the block's own operators") {
        const auto ms = analytic::ms_block<double>(blur, B, 6, 3, 0.7);
        const auto l = oracle::resize(oracle::conv2d(h, oracle::per_band_kernel(blur, B), Tensor<double>({B})), 8 / r, 8 / r);
        CHECK(oracle::max_abs_diff(ms_block_forward(VarD::constant(h), VarD::constant(l), ms).value(), h) < 1e-14);
        const auto pan = analytic::pan_block<double>(s, 6, 3, 0.7);
        const auto p = oracle::spectral(h.reshaped({B, 8, 8}), s).reshaped({1, 1, 8, 8});
        CHECK(oracle::max_abs_diff(pan_block_forward(VarD::constant(h), VarD::constant(p), pan).value(), h) < 1e-14);
    }
}

TEST_CASE("forward") {
    const auto lrms = oracle::random_tensor({2, 3, 4, 4}, 20, 0.0, 1.0);
    const auto pan = oracle::random_tensor({2, 1, 8, 8}, 21, 0.0, 1.0);

    SUBCASE("output shape") {
        const auto w = init_weights<double>(small_config(), 1);
        CHECK(forward(VarD::constant(lrms), VarD::constant(pan), w).shape() == Shape{2, 3, 8, 8});
    }
    SUBCASE("zeroed residual paths return the bicubic start") {
        auto cfg = small_config();
        NetworkWeights<double> w;
        w.config = cfg;
        for (std::size_t k = 0; k < cfg.layers; ++k) {
            LayerWeights<double> l;
            l.ms = analytic::ms_block<double>(oracle::random_blur(3, 30 + k), 3, 6, 3, 0.5);
            l.pan = analytic::pan_block<double>(oracle::random_spectral(3, 40 + k), 6, 3, 0.5);
            l.ms.up.second.weight.mutable_value() = Tensor<double>(l.ms.up.second.weight.shape());
            l.pan.expand.second.weight.mutable_value() = Tensor<double>(l.pan.expand.second.weight.shape());
            w.layers.push_back(std::move(l));
        }
        const auto out = forward(VarD::constant(lrms), VarD::constant(pan), w).value();
        CHECK(oracle::max_abs_diff(out, oracle::resize(lrms, 8, 8)) < 1e-14);
    }
    SUBCASE("one analytic layer equals an MS step followed by a PAN step") {
        auto cfg = small_config();
        cfg.layers = 1;
        const auto blur = oracle::random_blur(3, 50);
        const auto s = oracle::random_spectral(3, 51);
        NetworkWeights<double> w;
        w.config = cfg;
        w.layers.push_back({analytic::ms_block<double>(blur, 3, 6, 3, 0.4), analytic::pan_block<double>(s, 6, 3, 0.6)});
        const auto h0 = oracle::resize(lrms, 8, 8);
        const auto ref = oracle::pan_reference(oracle::ms_reference(h0, lrms, blur, 0.4), pan, s, 0.6);
        CHECK(oracle::max_abs_diff(forward(VarD::constant(lrms), VarD::constant(pan), w).value(), ref) < 1e-12);
    }
    SUBCASE("shape errors") {
        const auto w = init_weights<double>(small_config(), 1);
        CHECK_THROWS_AS(forward(VarD::constant(lrms), VarD::constant(Tensor<double>({2, 1, 6, 6})), w), ShapeError);
        CHECK_THROWS_AS(forward(VarD::constant(Tensor<double>({2, 4, 4, 4})), VarD::constant(pan), w), ShapeError);
    }
}

TEST_CASE("initialization") {
    const auto cfg = small_config();
    const auto a = init_weights<float>(cfg, 5), b = init_weights<float>(cfg, 5), c = init_weights<float>(cfg, 6);
    const auto pa = a.named_parameters(), pb = b.named_parameters(), pc = c.named_parameters();
    REQUIRE(pa.size() == pb.size());
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second.value() == pb[i].second.value());
        differs |= !(pa[i].second.value() == pc[i].second.value());
    }
    CHECK(differs);

    std::size_t rhos = 0;
    for (const auto& [name, v] : pa) {
        CAPTURE(name);
        if (name.ends_with(".rho")) {
            ++rhos;
            CHECK(v.value()[0] == doctest::Approx(0.1f));
        } else if (name.ends_with(".bias")) {
            for (float x : v.value().data()) CHECK(x == 0.0f);
        } else {
            const auto& s = v.shape();
            const double bound = std::sqrt(3.0 / double(s[1] * s[2] * s[3]));
            for (float x : v.value().data()) CHECK(std::abs(x) <= bound);
        }
    }
    CHECK(rhos == 2 * cfg.layers);
}

TEST_CASE("parameter counts") {
    NetworkConfig defaults;
    CHECK(expected_parameter_count(defaults) == 155832);
    CHECK(init_weights<float>(defaults, 0).parameter_count() == 155832);

    for (Ablation a : {Ablation::none, Ablation::no_prox, Ablation::shared_weights, Ablation::fused_block,
                       Ablation::transposed_kernels}) {
        CAPTURE(to_string(a));
        const auto cfg = small_config(a);
        CHECK(init_weights<float>(cfg, 0).parameter_count() == expected_parameter_count(cfg));
    }
}

TEST_CASE("ablation structure") {
    const auto full = init_weights<float>(small_config(), 3);

    SUBCASE("no_prox has no prox parameters") {
        const auto w = init_weights<float>(small_config(Ablation::no_prox), 3);
        for (const auto& [name, v] : w.named_parameters()) CHECK(name.find("prox") == std::string::npos);
        const auto lrms = Var<float>::constant(oracle::random_tensor({1, 3, 4, 4}, 1, 0, 1).cast<float>());
        const auto pan = Var<float>::constant(oracle::random_tensor({1, 1, 8, 8}, 2, 0, 1).cast<float>());
        CHECK(forward(lrms, pan, w).shape() == Shape{1, 3, 8, 8});
    }
    SUBCASE("shared weights store one layer") {
        const auto cfg = small_config(Ablation::shared_weights);
        const auto w = init_weights<float>(cfg, 3);
        CHECK(w.layers.size() == 1);
        CHECK(w.parameter_count() * cfg.layers == full.parameter_count());
        CHECK(&w.layer(0) == &w.layer(2));
    }
    SUBCASE("fused block has one prox per layer") {
        const auto w = init_weights<float>(small_config(Ablation::fused_block), 3);
        for (const auto& l : w.layers) {
            CHECK(l.ms.prox.has_value());
            CHECK(!l.pan.prox.has_value());
        }
    }
    SUBCASE("tied kernels are the rotated transposes") {
        const auto w = init_weights<float>(small_config(Ablation::transposed_kernels), 3);
        for (const auto& l : w.layers) {
            const auto up = l.ms.up_kernels();
            const auto& d1 = l.ms.down.first.weight.value();
            const auto& u2 = up.second.weight.value();
            REQUIRE(u2.shape() == Shape{d1.dim(1), d1.dim(0), d1.dim(2), d1.dim(3)});
            const std::size_t K = d1.dim(2);
            for (std::size_t o = 0; o < d1.dim(0); ++o)
                for (std::size_t i = 0; i < d1.dim(1); ++i)
                    for (std::size_t y = 0; y < K; ++y)
                        for (std::size_t x = 0; x < K; ++x)
                            CHECK(u2.at(i, o, K - 1 - y, K - 1 - x) == d1.at(o, i, y, x));
            CHECK(up.first.weight.value() == rotate_transpose(l.ms.down.second.weight.value()));
            const auto ex = l.pan.expand_kernels();
            CHECK(ex.first.weight.value() == rotate_transpose(l.pan.reduce.second.weight.value()));
            CHECK(ex.second.weight.value() == rotate_transpose(l.pan.reduce.first.weight.value()));
        }
        for (const auto& [name, v] : w.named_parameters())
            CHECK(!(name.find(".up.") != std::string::npos && name.ends_with(".weight")));
    }
}

TEST_CASE("forward is deterministic and float/double consistent") {
    const auto cfg = small_config();
    const auto wf = init_weights<float>(cfg, 11);
    const auto lrms = oracle::random_tensor({1, 3, 4, 4}, 12, 0, 1), pan = oracle::random_tensor({1, 1, 8, 8}, 13, 0, 1);
    const auto a = forward(Var<float>::constant(lrms.cast<float>()), Var<float>::constant(pan.cast<float>()), wf);
    const auto b = forward(Var<float>::constant(lrms.cast<float>()), Var<float>::constant(pan.cast<float>()), wf);
    CHECK(a.value() == b.value());
    const auto d = forward(VarD::constant(lrms), VarD::constant(pan), wf.cast<double>());
    CHECK(oracle::max_abs_diff(a.value().cast<double>(), d.value()) < 1e-4);
}

TEST_CASE("config json") {
    auto cfg = small_config(Ablation::fused_block);
    cfg.seed = 77;
    const nlohmann::json j = cfg;
    CHECK(j["ablation"] == "fused_block");
    const auto back = j.get<NetworkConfig>();
    CHECK(back.layers == cfg.layers);
    CHECK(back.width == cfg.width);
    CHECK(back.bands == cfg.bands);
    CHECK(back.ratio == cfg.ratio);
    CHECK(back.seed == 77);
    CHECK(back.ablation == Ablation::fused_block);
    CHECK_THROWS_AS(ablation_from_string("dropout"), std::invalid_argument);
    cfg.k_pan = 3;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "pansharp_test_ckpt";
    std::filesystem::remove_all(dir);
    for (Ablation a : {Ablation::none, Ablation::transposed_kernels, Ablation::shared_weights}) {
        CAPTURE(to_string(a));
        const auto w = init_weights<float>(small_config(a), 21);
        save_checkpoint(dir.string(), w);
        const auto back = load_checkpoint(dir.string());
        CHECK(back.config.ablation == a);
        const auto pa = w.named_parameters(), pb = back.named_parameters();
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            CHECK(pa[i].first == pb[i].first);
            CHECK(pa[i].second.value() == pb[i].second.value());
        }
        std::filesystem::remove_all(dir);
    }
    CHECK_THROWS_AS(load_checkpoint((dir / "missing").string()), IoError);
}
