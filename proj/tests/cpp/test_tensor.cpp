#include <cmath>
#include <string>
#include <vector>

#include "ctsac/tensor.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ctsac::grad;
using ctsac::Rng;
using testutil::fd_check;

namespace {

constexpr double kTol = 1e-7;  // FD agreement for smooth ops in double precision

Tensor param(std::vector<std::size_t> shape, std::vector<double> values) {
    return Tensor::parameter(std::move(shape), std::move(values));
}

// Fixed non-uniform weights so reductions see distinct per-element gradients.
Tensor weights_like(const Tensor& t) {
    std::vector<double> w(t.numel());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i);
    return Tensor::from_values(t.shape(), std::move(w));
}

double check_unary(const std::function<Tensor(const Tensor&)>& op,
                   std::vector<double> values) {
    Tensor x = param({2, 3}, std::move(values));
    auto rep = fd_check({{"x", x}}, [&] { return sum_all(mul(op(x), weights_like(x))); });
    return rep.max_rel_err;
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
    std::vector<double> smooth{0.3, -0.7, 1.2, 0.5, -0.2, 0.9};
    CHECK(check_unary([](const Tensor& x) { return neg(x); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return scale(x, -1.7); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return add_scalar(x, 2.5); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return exp_op(x); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return tanh_op(x); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return gelu(x); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return softplus(x); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return square(x); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return log_op(x); },
                      {0.5, 1.3, 2.2, 0.8, 1.9, 0.4}) < kTol);
    // Kinked ops, sampled away from their kinks.
    CHECK(check_unary([](const Tensor& x) { return relu(x); }, smooth) < kTol);
    CHECK(check_unary([](const Tensor& x) { return clamp(x, -1.0, 1.0); },
                      {-2.0, -0.5, 0.3, 1.7, 0.9, -1.4}) < kTol);
}

TEST_CASE("binary op gradients match finite differences") {
    Tensor a = param({2, 3}, {0.4, -0.6, 1.1, 0.2, -1.3, 0.7});
    Tensor b = param({2, 3}, {-0.9, 0.8, 0.1, -0.4, 1.5, -0.3});
    auto weighted = [&](const Tensor& y) { return sum_all(mul(y, weights_like(y))); };
    CHECK(fd_check({{"a", a}, {"b", b}}, [&] { return weighted(add(a, b)); }).max_rel_err < kTol);
    CHECK(fd_check({{"a", a}, {"b", b}}, [&] { return weighted(sub(a, b)); }).max_rel_err < kTol);
    CHECK(fd_check({{"a", a}, {"b", b}}, [&] { return weighted(mul(a, b)); }).max_rel_err < kTol);
    CHECK(fd_check({{"a", a}, {"b", b}}, [&] { return weighted(minimum(a, b)); }).max_rel_err <
          kTol);
}

TEST_CASE("minimum forward picks elementwise minima") {
    Tensor a = Tensor::from_values({4}, {1.0, 5.0, -2.0, 0.0});
    Tensor b = Tensor::from_values({4}, {2.0, 3.0, -1.0, -4.0});
    Tensor m = minimum(a, b);
    CHECK(m.values() == std::vector<double>{1.0, 3.0, -2.0, -4.0});
}

TEST_CASE("linear algebra gradients match finite differences") {
    Tensor x = param({3, 4}, {0.2, -0.5, 0.9, 0.1, 1.2, -0.3, 0.4, -0.8, 0.6, 0.7, -1.1, 0.05});
    Tensor w = param({4, 2}, {0.3, -0.2, 0.8, 0.5, -0.6, 0.1, 0.9, -0.4});
    Tensor b = param({2}, {0.15, -0.25});
    auto weighted = [&](const Tensor& y) { return sum_all(mul(y, weights_like(y))); };
    CHECK(fd_check({{"x", x}, {"w", w}, {"b", b}},
                   [&] { return weighted(affine(x, w, b)); })
              .max_rel_err < kTol);
    CHECK(fd_check({{"x", x}, {"w", w}}, [&] { return weighted(matmul(x, w)); }).max_rel_err <
          kTol);
}

TEST_CASE("affine matches a hand-computed product") {
    Tensor x = Tensor::from_values({1, 2}, {2.0, 3.0});
    Tensor w = Tensor::from_values({2, 2}, {1.0, -1.0, 0.5, 2.0});
    Tensor b = Tensor::from_values({2}, {10.0, 20.0});
    Tensor y = affine(x, w, b);
    CHECK(y.values()[0] == doctest::Approx(2.0 * 1.0 + 3.0 * 0.5 + 10.0));
    CHECK(y.values()[1] == doctest::Approx(2.0 * -1.0 + 3.0 * 2.0 + 20.0));
}

TEST_CASE("shape op gradients match finite differences") {
    Tensor x = param({2, 6}, {0.2, -0.5, 0.9, 0.1, 1.2, -0.3, 0.4, -0.8, 0.6, 0.7, -1.1, 0.05});
    Tensor y = param({2, 2}, {0.9, -0.1, 0.3, 0.6});
    Tensor row = param({1, 5}, {0.1, -0.2, 0.3, -0.4, 0.5});
    auto weighted = [&](const Tensor& t) { return sum_all(mul(t, weights_like(t))); };

    CHECK(fd_check({{"x", x}}, [&] { return weighted(reshape(x, {3, 4})); }).max_rel_err < kTol);
    CHECK(fd_check({{"x", x}}, [&] { return weighted(slice_last(x, 2, 5)); }).max_rel_err < kTol);
    CHECK(fd_check({{"x", x}, {"y", y}}, [&] { return weighted(concat_last(x, y)); })
              .max_rel_err < kTol);
    CHECK(fd_check({{"row", row}}, [&] { return weighted(broadcast_rows(row, 4)); })
              .max_rel_err < kTol);
}

TEST_CASE("concat and slice lay out the last axis correctly") {
    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_values({2, 1}, {9, 8});
    Tensor c = concat_last(a, b);
    CHECK(c.shape() == std::vector<std::size_t>{2, 3});
    CHECK(c.values() == std::vector<double>{1, 2, 9, 3, 4, 8});
    Tensor s = slice_last(c, 1, 3);
    CHECK(s.values() == std::vector<double>{2, 9, 4, 8});
}

TEST_CASE("reduction gradients match finite differences") {
    Tensor x = param({2, 3, 4}, [] {
        std::vector<double> v(24);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i) - 0.4;
        return v;
    }());
    auto weighted = [&](const Tensor& t) { return sum_all(mul(t, weights_like(t))); };
    CHECK(fd_check({{"x", x}}, [&] { return sum_all(x); }).max_rel_err < kTol);
    CHECK(fd_check({{"x", x}}, [&] { return mean_all(x); }).max_rel_err < kTol);
    CHECK(fd_check({{"x", x}}, [&] { return weighted(sum_last(x)); }).max_rel_err < kTol);
    CHECK(fd_check({{"x", x}}, [&] { return weighted(mean_axis(x, 1)); }).max_rel_err < kTol);
}

TEST_CASE("mean over the sequence axis of ones is ones") {
    Tensor x = Tensor::constant({2, 4, 3}, 1.0);
    Tensor m = mean_axis(x, 1);
    CHECK(m.shape() == std::vector<std::size_t>{2, 3});
    for (double v : m.values()) CHECK(v == doctest::Approx(1.0));
    CHECK_THROWS_AS(mean_axis(x, 0), ctsac::ShapeError);
}

TEST_CASE("softmax of a zero row is uniform") {
    Tensor x = Tensor::from_values({1, 3}, {0.0, 0.0, 0.0});
    Tensor s = softmax_last(x);
    for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one and its gradient matches finite differences") {
    Tensor x = param({2, 4}, {0.3, -1.2, 0.8, 2.0, -0.4, 0.9, 0.1, -2.2});
    Tensor s = softmax_last(x);
    for (int r = 0; r < 2; ++r) {
        double sum = 0.0;
        for (int c = 0; c < 4; ++c) sum += s.values()[r * 4 + c];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    }
    auto rep = fd_check({{"x", x}},
                        [&] { return sum_all(mul(softmax_last(x), weights_like(x))); });
    CHECK(rep.max_rel_err < kTol);
}

TEST_CASE("layer_norm standardizes rows and its gradient matches finite differences") {
    // Inputs scaled well above the epsilon floor so the row variance reads 1.
    Tensor big = Tensor::from_values({2, 4}, {10.0, -20.0, 5.0, 30.0, -40.0, 7.0, 22.0, -3.0});
    Tensor g1 = Tensor::from_values({4}, {1.0, 1.0, 1.0, 1.0});
    Tensor b0 = Tensor::from_values({4}, {0.0, 0.0, 0.0, 0.0});
    Tensor out = layer_norm(big, g1, b0);
    for (int r = 0; r < 2; ++r) {
        double mean = 0.0, var = 0.0;
        for (int c = 0; c < 4; ++c) mean += out.values()[r * 4 + c];
        mean /= 4.0;
        for (int c = 0; c < 4; ++c) {
            double d = out.values()[r * 4 + c] - mean;
            var += d * d;
        }
        var /= 4.0;
        CHECK(std::fabs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }

    Tensor x = param({2, 4}, {0.3, -1.2, 0.8, 2.0, -0.4, 0.9, 0.1, -2.2});
    Tensor gamma = param({4}, {1.1, 0.9, 1.3, 0.7});
    Tensor beta = param({4}, {0.1, -0.2, 0.3, -0.4});
    auto rep = fd_check({{"x", x}, {"gamma", gamma}, {"beta", beta}}, [&] {
        return sum_all(mul(layer_norm(x, gamma, beta), weights_like(x)));
    });
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("dropout is identity in eval mode and reproducible in train mode") {
    Tensor x = param({2, 4}, {0.3, -1.2, 0.8, 2.0, -0.4, 0.9, 0.1, -2.2});
    Rng rng(1);
    Tensor same = dropout(x, 0.4, false, rng);
    CHECK(same.values() == x.values());
    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ctsac::ShapeError);
    CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ctsac::ShapeError);

    // Same seed, same mask: the op is then a fixed linear map and FD applies.
    auto rep = fd_check({{"x", x}}, [&] {
        Rng masked(42);
        return sum_all(mul(dropout(x, 0.3, true, masked), weights_like(x)));
    });
    CHECK(rep.max_rel_err < kTol);

    Rng r1(7), r2(7);
    Tensor d1 = dropout(x, 0.5, true, r1);
    Tensor d2 = dropout(x, 0.5, true, r2);
    CHECK(d1.values() == d2.values());
    for (std::size_t i = 0; i < d1.values().size(); ++i) {
        const double v = d1.values()[i];
        CHECK((v == 0.0 || v == doctest::Approx(x.values()[i] / 0.5)));
    }
}

TEST_CASE("single-position single-head attention returns its value input") {
    Tensor q = Tensor::from_values({2, 1, 4}, {0.3, -0.2, 0.9, 1.1, -0.7, 0.4, 0.0, 0.5});
    Tensor k = Tensor::from_values({2, 1, 4}, {1.0, 0.2, -0.3, 0.8, 0.1, -0.9, 0.6, 0.4});
    Tensor v = Tensor::from_values({2, 1, 4}, {5.0, -6.0, 7.0, 8.0, -1.0, 2.0, -3.0, 4.0});
    Tensor out = multi_head_attention(q, k, v, 1);
    REQUIRE(out.shape() == v.shape());
    for (std::size_t i = 0; i < v.numel(); ++i)
        CHECK(out.values()[i] == doctest::Approx(v.values()[i]).epsilon(1e-14));
}

TEST_CASE("multi-head attention gradients match finite differences") {
    auto fill = [](std::size_t n, double a, double b) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = a + b * static_cast<double>(i % 7) - 0.3;
        return v;
    };
    Tensor q = param({2, 3, 4}, fill(24, 0.1, 0.13));
    Tensor k = param({2, 3, 4}, fill(24, -0.2, 0.11));
    Tensor v = param({2, 3, 4}, fill(24, 0.3, -0.09));
    auto rep = fd_check({{"q", q}, {"k", k}, {"v", v}}, [&] {
        return sum_all(mul(multi_head_attention(q, k, v, 2), weights_like(q)));
    });
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("stop_grad blocks its branch while passing values through") {
    Tensor x = param({3}, {1.0, -2.0, 3.0});
    Tensor frozen = stop_grad(x);
    CHECK(frozen.values() == x.values());

    x.zero_grad();
    backward(sum_all(square(stop_grad(x))));
    CHECK(x.grad() == std::vector<double>{0.0, 0.0, 0.0});

    // Gradient through the live factor only: d/dx sum(stop(x) * x) = stop(x).
    x.zero_grad();
    backward(sum_all(mul(stop_grad(x), x)));
    CHECK(x.grad() == std::vector<double>{1.0, -2.0, 3.0});

    // And that defined derivative matches finite differences when the stopped
    // branch is a separate constant.
    Tensor c = Tensor::from_values({3}, {0.5, 1.5, -0.7});
    auto rep = fd_check({{"x", x}}, [&] { return sum_all(mul(stop_grad(c), x)); });
    CHECK(rep.max_rel_err < kTol);
}

TEST_CASE("backward accumulates until grads are cleared") {
    Tensor x = param({2}, {3.0, -1.0});
    backward(sum_all(square(x)));
    CHECK(x.grad() == std::vector<double>{6.0, -2.0});
    backward(sum_all(square(x)));  // fresh graph, same values: grads add up
    CHECK(x.grad() == std::vector<double>{12.0, -4.0});
    x.zero_grad();
    backward(sum_all(square(x)));
    CHECK(x.grad() == std::vector<double>{6.0, -2.0});
}

TEST_CASE("backward demands a scalar loss") {
    Tensor x = param({2, 2}, {1, 2, 3, 4});
    try {
        backward(square(x));
        FAIL("expected ShapeError");
    } catch (const ctsac::ShapeError& e) {
        CHECK(std::string(e.what()).find("(2, 2)") != std::string::npos);
    }
    CHECK_THROWS_AS(square(x).item(), ctsac::ShapeError);
}

TEST_CASE("shape mismatches name both shapes") {
    Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_values({3, 2}, {1, 2, 3, 4, 5, 6});
    try {
        (void)add(a, b);
        FAIL("expected ShapeError");
    } catch (const ctsac::ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("(2, 3)") != std::string::npos);
        CHECK(msg.find("(3, 2)") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(a, a), ctsac::ShapeError);
    CHECK_THROWS_AS(reshape(a, {4, 2}), ctsac::ShapeError);
}

TEST_CASE("NoGrad suppresses graph construction") {
    Tensor x = param({2}, {1.0, 2.0});
    {
        NoGrad off;
        CHECK_FALSE(grad_enabled());
        Tensor y = sum_all(square(x));
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(grad_enabled());
    Tensor y = sum_all(square(x));
    CHECK(y.requires_grad());
}

TEST_CASE("Adam leaves parameters alone when grads and decay are zero") {
    ParamStore store;
    Tensor w = store.add("w", Tensor::from_values({3}, {1.0, -2.0, 0.5}));
    Adam opt(store, AdamConfig{1e-2, 0.9, 0.999, 1e-8, 0.0});
    std::vector<double> before = w.values();
    for (int i = 0; i < 5; ++i) {
        store.zero_grad();
        opt.step();
    }
    CHECK(w.values() == before);
    CHECK(opt.step_count() == 5);
}

TEST_CASE("Adam moves by about the learning rate against a constant gradient") {
    ParamStore store;
    Tensor w = store.add("w", Tensor::from_values({2}, {0.0, 1.0}));
    AdamConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.weight_decay = 0.0;
    Adam opt(store, cfg);
    for (int i = 0; i < 10; ++i) {
        store.zero_grad();
        w.grad()[0] = 2.0;
        w.grad()[1] = -0.5;
        opt.step();
    }
    CHECK(w.values()[0] == doctest::Approx(-10 * cfg.learning_rate).epsilon(1e-4));
    CHECK(w.values()[1] == doctest::Approx(1.0 + 10 * cfg.learning_rate).epsilon(1e-4));
}

TEST_CASE("decoupled decay shrinks only flagged parameters") {
    ParamStore store;
    Tensor w = store.add("w", Tensor::from_values({1}, {2.0}), true);
    Tensor b = store.add("b", Tensor::from_values({1}, {2.0}), false);
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.5;
    Adam opt(store, cfg);
    double expected = 2.0;
    for (int i = 0; i < 4; ++i) {
        store.zero_grad();
        opt.step();
        expected *= 1.0 - cfg.learning_rate * cfg.weight_decay;
        CHECK(w.values()[0] == doctest::Approx(expected).epsilon(1e-15));
        CHECK(b.values()[0] == 2.0);
    }
}

TEST_CASE("parameter stores reject duplicate names and unknown lookups") {
    ParamStore store;
    store.add("w", Tensor::from_values({1}, {1.0}));
    CHECK_THROWS_AS(store.add("w", Tensor::from_values({1}, {2.0})), ctsac::ShapeError);
    CHECK_THROWS_AS(store.get("missing"), ctsac::ShapeError);
    CHECK(store.total_params() == 1);
    CHECK(store.get("w").values()[0] == 1.0);
}
