#include <doctest/doctest.h>

#include <cmath>

#include "pansharp/adam.hpp"
#include "pansharp/autodiff.hpp"
#include "pansharp/gradcheck.hpp"
#include "pansharp/image_ops.hpp"
#include "support/oracles.hpp"

using namespace pansharp;

namespace {

Var<double> vec(std::vector<double> v, bool param = true) {
    const std::size_t n = v.size();
    Tensor<double> t({n}, std::move(v));
    return param ? Var<double>::parameter(std::move(t)) : Var<double>::constant(std::move(t));
}

}  // namespace

TEST_CASE("elementwise ops") {
    CHECK(add(vec({1, 2}), vec({3, 4})).value() == Tensor<double>({2}, std::vector<double>{4, 6}));
    CHECK(sub(vec({1, 2}), vec({3, 4})).value() == Tensor<double>({2}, std::vector<double>{-2, -2}));
    CHECK(scalar_mul(vec({1, 2}), 3.0).value() == Tensor<double>({2}, std::vector<double>{3, 6}));
    CHECK_THROWS_AS(add(vec({1, 2}), vec({1, 2, 3})), ShapeError);
    try {
        sub(vec({1, 2}), vec({1, 2, 3}));
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2]") != std::string::npos);
        CHECK(msg.find("[3]") != std::string::npos);
    }
}

TEST_CASE("l1 loss values") {
    const auto x = vec({0.5, -2.0, 3.0});
    CHECK(l1_loss(x, x).value()[0] == 0.0);
    CHECK(l1_loss(vec({0, 0}), vec({1, -3})).value()[0] == doctest::Approx(2.0));
}

TEST_CASE("backward basics") {
    SUBCASE("sum of 2x") {
        const auto x = vec({1, 1});
        backward(sum(scalar_mul(x, 2.0)));
        CHECK(x.grad() == Tensor<double>({2}, std::vector<double>{2, 2}));
    }
    SUBCASE("l1 against zero") {
        const auto x = vec({3, -3});
        backward(l1_loss(x, vec({0, 0}, false)));
        CHECK(x.grad() == Tensor<double>({2}, std::vector<double>{0.5, -0.5}));
    }
    SUBCASE("l1 subgradient at equality is zero") {
        const auto x = vec({1, 2});
        backward(l1_loss(x, vec({1, 5}, false)));
        CHECK(x.grad()[0] == 0.0);
        CHECK(x.grad()[1] == -0.5);
    }
    SUBCASE("fan-out accumulates") {
        const auto x = vec({1, 2});
        backward(sum(add(x, add(x, x))));
        CHECK(x.grad() == Tensor<double>({2}, std::vector<double>{3, 3}));
    }
    SUBCASE("unreachable parameter gets zeros") {
        const auto x = vec({1, 2});
        const auto unused = vec({5});
        backward(sum(x));
        CHECK(unused.grad() == Tensor<double>({1}));
        CHECK_FALSE(unused.has_grad());
    }
    SUBCASE("non-scalar loss") {
        CHECK_THROWS_AS(backward(vec({1, 2})), ShapeError);
    }
    SUBCASE("constants record nothing") {
        const auto c = add(vec({1}, false), vec({2}, false));
        CHECK_FALSE(c.requires_grad());
        CHECK(c.node()->parents.empty());
    }
}

TEST_CASE("topological order visits each node once, parents first") {
    const auto x = vec({1, 2});
    const auto a = add(x, x);
    const auto b = scalar_mul(a, 2.0);
    const auto loss = sum(add(a, b));
    const auto order = topological_order(loss);
    CHECK(order.size() == 5);
    auto pos = [&](const Var<double>& v) {
        return std::find(order.begin(), order.end(), v.node().get()) - order.begin();
    };
    CHECK(pos(x) < pos(a));
    CHECK(pos(a) < pos(b));
    CHECK(pos(b) < pos(loss));
}

TEST_CASE("backward is linear in the loss") {
    const auto xv = oracle::random_tensor({1, 2, 5, 5}, 1);
    const auto w = Var<double>::parameter(oracle::random_tensor({3, 2, 3, 3}, 2));
    const auto b = Var<double>::parameter(oracle::random_tensor({3}, 3));
    const auto x = Var<double>::parameter(xv);
    const ConvKernel<double> k(w, b);
    const auto r1 = oracle::random_tensor({1, 3, 5, 5}, 4), r2 = oracle::random_tensor({1, 3, 5, 5}, 5);
    auto grads = [&](auto make_loss) {
        for (const auto& v : {x, w, b}) v.zero_grad();
        backward(make_loss());
        return std::vector<Tensor<double>>{x.grad(), w.grad(), b.grad()};
    };
    const double alpha = 0.7, beta = -1.3;
    const auto g1 = grads([&] { return weighted_sum(relu(conv2d(x, k)), r1); });
    const auto g2 = grads([&] { return weighted_sum(conv2d(x, k), r2); });
    const auto g = grads([&] {
        return add(scalar_mul(weighted_sum(relu(conv2d(x, k)), r1), alpha),
                   scalar_mul(weighted_sum(conv2d(x, k), r2), beta));
    });
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < g[i].size(); ++j)
            CHECK(std::abs(g[i][j] - (alpha * g1[i][j] + beta * g2[i][j])) < 1e-10);
}

TEST_CASE("random three-op composite matches finite differences") {
    const auto a = Var<double>::parameter(oracle::random_tensor({1, 2, 4, 4}, 21));
    const auto c = Var<double>::parameter(oracle::random_tensor({1}, 22));
    const auto target = oracle::random_tensor({1, 2, 8, 8}, 23);
    const auto r = finite_diff_check(
        "composite", [&] { return weighted_sum(scale_by(c, bicubic_upsample(add(a, a), 2)), target); }, {a, c});
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        std::vector<Var<double>> params{vec({1.0, -2.0})};
        AdamState<double> st(AdamOptions{}, params);
        adam_step(params, {Tensor<double>({2})}, st);
        CHECK(params[0].value() == Tensor<double>({2}, std::vector<double>{1.0, -2.0}));
        CHECK(st.t == 1);
    }
    SUBCASE("first step moves by lr") {
        std::vector<Var<double>> params{vec({0.0})};
        AdamState<double> st(AdamOptions{.lr = 0.1}, params);
        adam_step(params, {Tensor<double>({1}, 1.0)}, st);
        CHECK(params[0].value()[0] == doctest::Approx(-0.1).epsilon(1e-6));
    }
    SUBCASE("five steps on theta^2 match a reference loop") {
        std::vector<Var<double>> params{vec({1.0})};
        AdamState<double> st(AdamOptions{.lr = 0.1}, params);
        double theta = 1.0, m = 0.0, v = 0.0;
        for (int t = 1; t <= 5; ++t) {
            adam_step(params, {Tensor<double>({1}, 2.0 * params[0].value()[0])}, st);

            const double g = 2.0 * theta;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            const double mh = m / (1.0 - std::pow(0.9, t));
            const double vh = v / (1.0 - std::pow(0.999, t));
            theta -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
            CHECK(std::abs(params[0].value()[0] - theta) < 1e-12);
        }
        CHECK(st.t == 5);
    }
    SUBCASE("shape mismatch") {
        std::vector<Var<double>> params{vec({1.0, 2.0})};
        AdamState<double> st(AdamOptions{}, params);
        CHECK_THROWS_AS(adam_step(params, {Tensor<double>({3})}, st), ShapeError);
        CHECK_THROWS_AS(adam_step(params, {}, st), ShapeError);
    }
    SUBCASE("deterministic") {
        auto run = [] {
            std::vector<Var<float>> params{Var<float>::parameter(oracle::random_tensor({2, 3}, 9).cast<float>())};
            AdamState<float> st(AdamOptions{}, params);
            for (int i = 0; i < 10; ++i) {
                params[0].zero_grad();
                backward(l1_loss(params[0], Var<float>::constant(Tensor<float>({2, 3}, 0.25f))));
                adam_step(params, st);
            }
            return params[0].value();
        };
        CHECK(run() == run());
    }
}

TEST_CASE("finite difference check") {
    SUBCASE("relu away from the kink passes") {
        Tensor<double> xv({6}, std::vector<double>{-0.9, -0.3, -0.1, 0.1, 0.4, 1.2});
        const auto x = Var<double>::parameter(xv);
        const auto w = oracle::random_tensor({6}, 4);
        const auto r = finite_diff_check("relu", [&] { return weighted_sum(relu(x), w); }, {x});
        CHECK(r.passed);
    }
    SUBCASE("conv2d on a random 1x2x5x5 input") {
        const auto x = Var<double>::parameter(oracle::random_tensor({1, 2, 5, 5}, 1));
        const auto w = Var<double>::parameter(oracle::random_tensor({3, 2, 3, 3}, 2));
        const auto b = Var<double>::parameter(oracle::random_tensor({3}, 3));
        const auto proj = oracle::random_tensor({1, 3, 5, 5}, 4);
        const auto r = finite_diff_check(
            "conv2d", [&] { return weighted_sum(conv2d(x, ConvKernel<double>(w, b)), proj); }, {x, w, b});
        CHECK(r.rel_errors.size() == 3);
        CHECK(r.max_rel_error < 1e-5);
    }
    SUBCASE("bicubic resize on a random input") {
        const auto x = Var<double>::parameter(oracle::random_tensor({1, 2, 6, 4}, 5));
        const auto proj = oracle::random_tensor({1, 2, 9, 10}, 6);
        const auto r = finite_diff_check("resize", [&] { return weighted_sum(bicubic_resize(x, 9, 10), proj); }, {x});
        CHECK(r.max_rel_error < 1e-5);
    }
    SUBCASE("a conv with a negated input gradient fails") {
        // Forced-bug fixture: correct forward pass, wrong-sign backward.
        auto buggy_conv = [](const Var<double>& x, const Var<double>& w, const Var<double>& b) {
            Tensor<double> y = kernels::conv2d_forward(x.value(), w.value(), b.value());
            return Var<double>::from_op(std::move(y), {x, w, b}, [](Node<double>& self) {
                auto& xn = *self.parents[0];
                auto& wn = *self.parents[1];
                Tensor<double> gx = kernels::conv2d_grad_input(self.grad, wn.value);
                for (double& v : gx.data()) v = -v;
                xn.accumulate(gx);
            });
        };
        const auto x = Var<double>::parameter(oracle::random_tensor({1, 2, 5, 5}, 1));
        const auto w = Var<double>::constant(oracle::random_tensor({3, 2, 3, 3}, 2));
        const auto b = Var<double>::constant(oracle::random_tensor({3}, 3));
        const auto proj = oracle::random_tensor({1, 3, 5, 5}, 4);
        const auto r = finite_diff_check("buggy", [&] { return weighted_sum(buggy_conv(x, w, b), proj); }, {x});
        CHECK_FALSE(r.passed);
        CHECK(r.max_rel_error > 1.0);
    }
    SUBCASE("sampled coordinates are reported as one group") {
        const auto x = Var<double>::parameter(oracle::random_tensor({4}, 8));
        const auto y = Var<double>::parameter(oracle::random_tensor({4}, 9));
        const auto r = finite_diff_check("sampled", [&] { return sum(add(x, scalar_mul(y, 2.0))); }, {x, y}, 1e-6,
                                         1e-5, Coordinates{{0, 1}, {1, 3}});
        CHECK(r.rel_errors.size() == 1);
        CHECK(r.passed);
    }
}

TEST_CASE("full gradient suite") {
    const auto results = gradcheck_suite();
    CHECK(results.size() >= 11);
    for (const auto& r : results) {
        INFO(r.name << " max rel err " << r.max_rel_error);
        CHECK(r.passed);
    }
}
