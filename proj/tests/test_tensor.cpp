#include <doctest.h>

#include <cmath>

#include "rainfill/errors.hpp"
#include "rainfill/ops.hpp"
#include "rainfill/optim.hpp"
#include "support/gradcheck.hpp"

using namespace rainfill;
using rainfill::testing::check_gradients;
using rainfill::testing::random_tensor;

namespace {

// sum(r * y) with a fixed random r, so every output element matters.
Tensor project(const Tensor& y, const Tensor& r) { return ops::sum(ops::mul(y, r)); }

}  // namespace

TEST_CASE("conv3d trivial cases") {
    Rng rng(1);
    auto x = random_tensor({1, 1, 2, 3, 3}, rng, false);
    auto w = Tensor::full({1, 1, 1, 1, 1}, 2.0);
    auto y = ops::conv3d(x, w, Tensor::zeros({1}));
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(2 * x.data()[i]));

    auto z = ops::conv3d(x, Tensor::zeros({2, 1, 1, 3, 3}), Tensor::from_data({2}, {0.7, -0.3}));
    for (int64_t i = 0; i < z.numel(); ++i) CHECK(z.data()[i] == (i < z.numel() / 2 ? 0.7 : -0.3));
}

TEST_CASE("conv3d gradients match finite differences") {
    Rng rng(2);
    auto x = random_tensor({2, 3, 4, 4, 4}, rng);
    auto w = random_tensor({2, 3, 3, 3, 3}, rng);
    auto b = random_tensor({2}, rng);
    auto r = random_tensor({2, 2, 4, 4, 4}, rng, false);
    auto res = check_gradients([&] { return project(ops::conv3d(x, w, b, {1, 1, 1}, {1, 1, 1}), r); }, {x, w, b});
    CHECK(res.max_rel < 1e-4);

    auto r2 = random_tensor({2, 2, 2, 1, 1}, rng, false);
    auto res2 = check_gradients([&] { return project(ops::conv3d(x, w, b, {1, 2, 2}, {0, 0, 0}), r2); }, {x, w, b});
    CHECK(res2.max_rel < 1e-4);
}

TEST_CASE("conv3d is linear in its input") {
    Rng rng(3);
    auto x = random_tensor({1, 2, 3, 5, 4}, rng, false);
    auto y = random_tensor({1, 2, 3, 5, 4}, rng, false);
    auto w = random_tensor({3, 2, 3, 3, 3}, rng, false);
    const double a = 1.7, c = -0.4;
    auto lhs = ops::conv3d(ops::add(ops::scale(x, a), ops::scale(y, c)), w, Tensor(), {1, 1, 1}, {1, 1, 1});
    auto fx = ops::conv3d(x, w, Tensor(), {1, 1, 1}, {1, 1, 1});
    auto fy = ops::conv3d(y, w, Tensor(), {1, 1, 1}, {1, 1, 1});
    for (int64_t i = 0; i < lhs.numel(); ++i) {
        CHECK(std::abs(lhs.data()[i] - (a * fx.data()[i] + c * fy.data()[i])) < 1e-10);
    }
}

TEST_CASE("conv3d shape errors name the axis") {
    auto x = Tensor::zeros({1, 1, 2, 4, 4});
    auto w = Tensor::zeros({1, 1, 3, 3, 3});
    try {
        ops::conv3d(x, w, Tensor());
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("time") != std::string::npos);
    }
    CHECK_THROWS_AS(ops::conv3d(x, Tensor::zeros({1, 2, 1, 1, 1}), Tensor()), std::invalid_argument);
    CHECK_THROWS_AS(ops::conv3d(x, Tensor::zeros({1, 1, 1, 1, 1}), Tensor(), {1, 0, 1}), std::invalid_argument);
}

TEST_CASE("conv_transpose3d shapes and gradients") {
    Rng rng(4);
    auto x = random_tensor({2, 3, 2, 4, 4}, rng);
    auto w = random_tensor({3, 2, 1, 2, 2}, rng);
    auto b = random_tensor({2}, rng);
    auto y = ops::conv_transpose3d(x, w, b, {1, 2, 2});
    CHECK(y.shape() == Shape{2, 2, 2, 8, 8});
    auto r = random_tensor(y.shape(), rng, false);
    CHECK(check_gradients([&] { return project(ops::conv_transpose3d(x, w, b, {1, 2, 2}), r); }, {x, w, b}).max_rel <
          1e-4);

    auto w3 = random_tensor({3, 2, 3, 3, 3}, rng);
    auto r3 = random_tensor(ops::conv_transpose3d(x, w3, b, {1, 2, 2}, {1, 1, 1}).shape(), rng, false);
    CHECK(check_gradients([&] { return project(ops::conv_transpose3d(x, w3, b, {1, 2, 2}, {1, 1, 1}), r3); },
                          {x, w3, b})
              .max_rel < 1e-4);
    CHECK_THROWS_AS(ops::conv_transpose3d(x, w, b, {1, 0, 2}), std::invalid_argument);
}

TEST_CASE("conv_transpose3d is the adjoint of conv3d") {
    // <conv(x), y> == <x, convT(y)> for shared weights
    Rng rng(5);
    auto x = random_tensor({1, 2, 2, 6, 6}, rng, false);
    auto w = random_tensor({3, 2, 1, 2, 2}, rng, false);
    auto cx = ops::conv3d(x, w, Tensor(), {1, 2, 2});
    auto y = random_tensor(cx.shape(), rng, false);
    auto ty = ops::conv_transpose3d(y, w, Tensor(), {1, 2, 2});
    REQUIRE(ty.shape() == x.shape());
    double lhs = 0, rhs = 0;
    for (int64_t i = 0; i < cx.numel(); ++i) lhs += cx.data()[i] * y.data()[i];
    for (int64_t i = 0; i < x.numel(); ++i) rhs += x.data()[i] * ty.data()[i];
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("conv_transpose3d of a constant field with a unit stride-matched kernel stays constant") {
    // kernel (1,2,2) with stride (1,2,2) tiles without overlap: interior and boundary rows alike
    auto x = Tensor::full({1, 1, 1, 3, 3}, 0.25);
    auto w = Tensor::full({1, 1, 1, 2, 2}, 1.0);
    auto y = ops::conv_transpose3d(x, w, Tensor(), {1, 2, 2});
    for (double v : y.data()) CHECK(v == 0.25);
    // stride 1 with a 3x3 kernel: only the interior sees all nine taps
    auto y2 = ops::conv_transpose3d(Tensor::full({1, 1, 1, 4, 4}, 1.0), Tensor::full({1, 1, 1, 3, 3}, 1.0 / 9),
                                    Tensor(), {1, 1, 1}, {0, 1, 1});
    for (int64_t h = 1; h < 3; ++h)
        for (int64_t w2 = 1; w2 < 3; ++w2) CHECK(y2.data()[h * 4 + w2] == doctest::Approx(1.0));
    CHECK(y2.data()[0] == doctest::Approx(4.0 / 9));
}

TEST_CASE("maxpool3d") {
    auto c = ops::maxpool3d(Tensor::full({1, 2, 2, 4, 4}, 0.3));
    CHECK(c.shape() == Shape{1, 2, 2, 2, 2});
    for (double v : c.data()) CHECK(v == 0.3);

    std::vector<double> spike(16, 0.0);
    spike[1 * 4 + 2] = 5.0;
    auto s = ops::maxpool3d(Tensor::from_data({1, 1, 1, 4, 4}, spike));
    CHECK(s.data()[1] == 5.0);
    CHECK(s.data()[0] == 0.0);

    Rng rng(6);
    auto x = random_tensor({2, 2, 2, 4, 6}, rng);
    auto r = random_tensor({2, 2, 2, 2, 3}, rng, false);
    CHECK(check_gradients([&] { return project(ops::maxpool3d(x), r); }, {x}).max_rel < 1e-4);
    CHECK_THROWS_AS(ops::maxpool3d(Tensor::zeros({1, 1, 1, 3, 4})), std::invalid_argument);
}

TEST_CASE("maxpool3d ties route to the first index") {
    auto x = Tensor::full({1, 1, 1, 2, 2}, 1.0, true);
    ops::sum(ops::maxpool3d(x)).backward();
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[3] == 0.0);
}

TEST_CASE("group_norm") {
    auto gamma = Tensor::full({4}, 1.0), beta = Tensor::zeros({4});
    auto z = ops::group_norm(Tensor::full({1, 4, 1, 2, 2}, 3.0), 2, gamma, beta);
    for (double v : z.data()) CHECK(v == 0.0);

    Rng rng(7);
    auto x = random_tensor({2, 8, 2, 3, 3}, rng);
    auto y = ops::group_norm(x, 4, Tensor::full({8}, 1.0), Tensor::zeros({8}));
    const int64_t per = 2 * 2 * 9;
    for (int64_t g = 0; g < 2 * 4; ++g) {
        double m = 0, v = 0;
        for (int64_t i = 0; i < per; ++i) m += y.data()[g * per + i];
        m /= per;
        for (int64_t i = 0; i < per; ++i) v += std::pow(y.data()[g * per + i] - m, 2);
        v /= per;
        CHECK(std::abs(m) < 1e-6);
        CHECK(std::abs(v - 1) < 1e-4);
    }

    // shift and scale of one group leave the output unchanged once eps scales with the variance
    std::vector<double> moved(x.data().begin(), x.data().end());
    for (int64_t i = 0; i < per; ++i) moved[i] = 3.0 * moved[i] + 11.0;
    auto y2 = ops::group_norm(Tensor::from_data(x.shape(), moved), 4, Tensor::full({8}, 1.0), Tensor::zeros({8}), 9e-5);
    for (int64_t i = 0; i < per; ++i) CHECK(std::abs(y.data()[i] - y2.data()[i]) < 1e-12);
    std::vector<double> shifted(x.data().begin(), x.data().end());
    for (int64_t i = 0; i < per; ++i) shifted[i] += 11.0;
    auto y3 = ops::group_norm(Tensor::from_data(x.shape(), shifted), 4, Tensor::full({8}, 1.0), Tensor::zeros({8}));
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y.data()[i] - y3.data()[i]) < 1e-12);

    auto gm = random_tensor({8}, rng), bt = random_tensor({8}, rng);
    auto r = random_tensor(x.shape(), rng, false);
    CHECK(check_gradients([&] { return project(ops::group_norm(x, 4, gm, bt), r); }, {x, gm, bt}).max_rel < 1e-4);
    CHECK_THROWS_AS(ops::group_norm(x, 3, Tensor::full({8}, 1.0), Tensor::zeros({8})), std::invalid_argument);
}

TEST_CASE("elementwise ops, pooling, concat") {
    CHECK(ops::silu(Tensor::scalar(0.0)).item() == 0.0);
    CHECK(ops::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    auto p = ops::adaptive_avg_pool3d(Tensor::full({2, 3, 2, 2, 4}, 1.25));
    CHECK(p.shape() == Shape{2, 3, 1, 1, 1});
    for (double v : p.data()) CHECK(v == doctest::Approx(1.25));

    auto a = Tensor::from_data({1, 2}, {1, 2}, true), b = Tensor::from_data({1, 3}, {3, 4, 5}, true);
    auto cat = ops::concat({a, b}, 1);
    CHECK(cat.shape() == Shape{1, 5});
    ops::sum(ops::mul(cat, Tensor::from_data({1, 5}, {10, 20, 30, 40, 50}))).backward();
    CHECK(a.grad()[0] == 10);
    CHECK(a.grad()[1] == 20);
    CHECK(b.grad()[2] == 50);
    CHECK_THROWS_AS(ops::concat({a, b}, 2), std::out_of_range);
    CHECK_THROWS(ops::add(a, b));

    Rng rng(8);
    auto x = random_tensor({2, 3}, rng), y = random_tensor({2, 3}, rng);
    auto w = random_tensor({4, 3}, rng), bias = random_tensor({4}, rng);
    auto s = random_tensor({1}, rng);
    auto r = random_tensor({2, 4}, rng, false);
    auto f = [&] {
        auto h = ops::linear(ops::silu(ops::mul(ops::add(x, y), ops::sigmoid(ops::sub(x, y)))), w, bias);
        return project(ops::add(ops::scale(ops::square(h), 0.5), ops::mul(h, s)), r);
    };
    CHECK(check_gradients(f, {x, y, w, bias, s}).max_rel < 1e-4);

    auto v = random_tensor({2, 3, 2, 2, 2}, rng), cb = random_tensor({2, 3}, rng), cs = random_tensor({2, 3}, rng);
    auto r2 = random_tensor({2, 3, 2, 2, 2}, rng, false);
    auto g = [&] {
        return project(ops::scale_channels(ops::add_channel_bias(v, cb), ops::reshape(ops::adaptive_avg_pool3d(
                                                                                           ops::square(v)),
                                                                                       {2, 3})),
                       r2);
    };
    CHECK(check_gradients(g, {v, cb}).max_rel < 1e-4);
    CHECK(check_gradients([&] { return project(ops::scale_channels(v, cs), r2); }, {v, cs}).max_rel < 1e-4);
}

TEST_CASE("backward accumulates and follows definitions") {
    auto x = Tensor::from_data({3}, {1, -2, 3}, true);
    ops::sum(x).backward();
    for (double g : x.grad()) CHECK(g == 1.0);
    ops::sum(x).backward();
    for (double g : x.grad()) CHECK(g == 2.0);
    x.zero_grad();
    ops::scale(ops::sum(ops::square(x)), 0.5).backward();
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == x.data()[i]);
    CHECK_THROWS_AS(ops::square(x).backward(), std::invalid_argument);
}

TEST_CASE("composed conv -> group_norm -> silu graph") {
    Rng rng(9);
    auto x = random_tensor({1, 2, 2, 4, 4}, rng);
    auto w = random_tensor({4, 2, 3, 3, 3}, rng);
    auto gm = random_tensor({4}, rng), bt = random_tensor({4}, rng);
    auto f = [&] { return ops::sum(ops::silu(ops::group_norm(ops::conv3d(x, w, Tensor(), {1, 1, 1}, {1, 1, 1}), 2, gm, bt))); };
    CHECK(check_gradients(f, {x, w, gm, bt}).max_rel < 1e-4);
}

TEST_CASE("row-weighted losses") {
    Rng rng(10);
    auto p = random_tensor({2, 1, 2, 3, 4}, rng), t = random_tensor({2, 1, 2, 3, 4}, rng, false);
    const std::vector<double> w{0.5, 2.0, 0.5};
    double brute = 0;
    for (int64_t i = 0; i < p.numel(); ++i) brute += w[(i / 4) % 3] * std::pow(p.data()[i] - t.data()[i], 2);
    CHECK(ops::row_weighted_mse(p, t, w).item() == doctest::Approx(brute / p.numel()).epsilon(1e-12));
    CHECK(check_gradients([&] { return ops::row_weighted_mse(p, t, w); }, {p}).max_rel < 1e-4);
    CHECK(check_gradients([&] { return ops::row_weighted_l1(p, t, w); }, {p}).max_rel < 1e-4);
}

TEST_CASE("adam and ema") {
    auto p = Tensor::from_data({2}, {1.0, -1.0}, true);
    std::vector<Tensor> params{p};
    AdamOptions o;
    o.weight_decay = 0.0;
    AdamState st(params, o);
    p.grad_mut()[0] = 0.0;
    p.grad_mut()[1] = 0.0;
    adam_step(params, st);
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -1.0);

    // constant gradient pushes the parameter steadily against it
    double prev = p.data()[0];
    for (int i = 0; i < 50; ++i) {
        p.grad_mut()[0] = 0.5;
        adam_step(params, st);
        CHECK(p.data()[0] < prev);
        prev = p.data()[0];
    }

    p.grad_mut()[1] = std::nan("");
    const double before = p.data()[0];
    CHECK_THROWS_AS(adam_step(params, st), NumericError);
    CHECK(p.data()[0] == before);

    auto q = Tensor::from_data({1}, {0.0}, true);
    std::vector<Tensor> qs{q};
    EmaState ema(qs, 0.999);
    q.data_mut()[0] = 1.0;
    ema_update(qs, ema);
    CHECK(ema.shadow[0][0] == doctest::Approx(0.001).epsilon(1e-12));
    CHECK_THROWS(EmaState(qs, 1.0));
}

TEST_CASE("ema closed form") {
    const double gamma = 0.9, s0 = 0.3;
    auto q = Tensor::from_data({1}, {s0}, true);
    std::vector<Tensor> qs{q};
    EmaState ema(qs, gamma);
    std::vector<double> theta;
    Rng rng(11);
    for (int i = 0; i < 25; ++i) {
        theta.push_back(rng.normal());
        q.data_mut()[0] = theta.back();
        ema_update(qs, ema);
    }
    const int n = static_cast<int>(theta.size());
    double expected = std::pow(gamma, n) * s0;
    for (int i = 0; i < n; ++i) expected += (1 - gamma) * std::pow(gamma, n - 1 - i) * theta[i];
    CHECK(std::abs(ema.shadow[0][0] - expected) < 1e-14);
}
