// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <limits>
#include <set>

#include "clgt/composites.hpp"
#include "clgt/gradcheck.hpp"
#include "clgt/gradsuites.hpp"
#include "clgt/optim.hpp"

using namespace clgt;
using DVar = ad::Var<double>;

TEST_CASE("matmul forward matches the triple-loop oracle") {
    Rng rng(7);
    auto a = Tensor<double>::randn({2, 3}, rng);
    auto b = Tensor<double>::randn({3, 2}, rng);
    auto y = ad::matmul(ad::constant(a), ad::constant(b));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double s = 0;
            for (int p = 0; p < 3; ++p) s += a.at(i * 3 + p) * b.at(p * 2 + j);
            CHECK(y->value.at(i * 2 + j) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("softmax rows sum to one and respect monotonicity") {
    Rng rng(8);
    auto x = Tensor<double>::randn({1, 2, 3}, rng);
    auto y = ad::softmax(ad::constant(x), 2);
    for (int r = 0; r < 2; ++r) {
        double s = 0;
        for (int c = 0; c < 3; ++c) {
            const double v = y->value.at(r * 3 + c);
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    // monotone in the input within a row
    for (int r = 0; r < 2; ++r)
        for (int c1 = 0; c1 < 3; ++c1)
            for (int c2 = 0; c2 < 3; ++c2)
                if (x.at(r * 3 + c1) < x.at(r * 3 + c2))
                    CHECK(y->value.at(r * 3 + c1) < y->value.at(r * 3 + c2));
}

TEST_CASE("conv2d same-padding preserves the plane size") {
    Rng rng(9);
    auto x = ad::constant(Tensor<double>::randn({1, 4, 4}, rng));
    auto w = ad::constant(Tensor<double>::randn({1, 1, 3, 3}, rng));
    auto y = ad::conv2d(x, w, ad::Var<double>{}, 1, 1);
    CHECK(y->value.shape == std::vector<int>{1, 4, 4});
}

TEST_CASE("layer norm output is standardized before affine") {
    Rng rng(10);
    auto x = ad::constant(Tensor<double>::randn({6, 32}, rng, 3.0));
    auto g = ad::constant(Tensor<double>::full({32}, 1.0));
    auto b = ad::constant(Tensor<double>({32}));
    auto y = ad::layer_norm(x, g, b, 1);
    for (int i = 0; i < 6; ++i) {
        double mean = 0, var = 0;
        for (int j = 0; j < 32; ++j) mean += y->value.at(i * 32 + j);
        mean /= 32;
        for (int j = 0; j < 32; ++j) {
            const double d = y->value.at(i * 32 + j) - mean;
            var += d * d;
        }
        var /= 32;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("backward of sum gives ones; of sum of squares gives 2x") {
    Rng rng(11);
    auto x = ad::leaf(Tensor<double>::randn({3, 4}, rng), true);
    ad::backward(ad::sum_all(x));
    for (int64_t i = 0; i < x->value.numel(); ++i) CHECK(x->grad.at(i) == doctest::Approx(1.0));

    auto x2 = ad::leaf(Tensor<double>::randn({3, 4}, rng), true);
    ad::backward(ad::sum_all(ad::mul(x2, x2)));
    for (int64_t i = 0; i < x2->value.numel(); ++i)
        CHECK(x2->grad.at(i) == doctest::Approx(2.0 * x2->value.at(i)).epsilon(1e-12));
}

TEST_CASE("repeated backward accumulates additively") {
    Rng rng(12);
    auto x = ad::leaf(Tensor<double>::randn({5}, rng), true);
    auto root = ad::sum_all(ad::mul(x, x));
    auto tape = ad::Tape<double>::build(root);
    ad::backward(tape, root);
    const double once = x->grad.at(2);
    ad::backward(tape, root);
    CHECK(x->grad.at(2) == doctest::Approx(2.0 * once).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar roots") {
    Rng rng(13);
    auto x = ad::leaf(Tensor<double>::randn({3}, rng), true);
    CHECK_THROWS_AS(ad::backward(ad::mul(x, x)), ValueError);
}

TEST_CASE("tape is topologically ordered and visits each node once") {
    Rng rng(14);
    auto x = ad::leaf(Tensor<double>::randn({2, 2}, rng), true);
    auto y = ad::mul(x, x);
    auto z = ad::add(y, y);  // diamond: y used twice
    auto root = ad::sum_all(z);
    auto tape = ad::Tape<double>::build(root);
    const auto& order = tape.entries();
    // uniqueness
    std::set<const void*> seen;
    for (const auto& n : order) CHECK(seen.insert(n.get()).second);
    // parents precede consumers
    for (size_t i = 0; i < order.size(); ++i)
        for (const auto& p : order[i]->parents) {
            size_t pi = order.size();
            for (size_t j = 0; j < order.size(); ++j)
                if (order[j].get() == p.get()) pi = j;
            CHECK(pi < i);
        }
}

TEST_CASE("ops on non-grad inputs stay off the tape") {
    Rng rng(15);
    auto x = ad::constant(Tensor<double>::randn({2, 2}, rng));
    auto y = ad::mul(x, x);
    CHECK_FALSE(y->requires_grad);
    CHECK(y->parents.empty());
}

TEST_CASE("shape mismatch reports both shapes") {
    Rng rng(16);
    auto a = ad::constant(Tensor<double>::randn({2, 3}, rng));
    auto b = ad::constant(Tensor<double>::randn({4, 2}, rng));
    try {
        ad::matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,2]") != std::string::npos);
    }
}

TEST_CASE("non-finite input is rejected") {
    Tensor<double> bad({2});
    bad.at(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ad::exp(ad::constant(bad)), ValueError);
}

TEST_CASE("backward is linear in the root") {
    Rng rng(17);
    const double a = 1.7, b = -0.6;
    auto make = [&](bool combined) {
        auto x = ad::leaf(Tensor<double>::randn({4}, Rng(99)), true);
        auto f = ad::sum_all(ad::mul(x, x));
        auto g = ad::sum_all(ad::gelu(x));
        if (combined) {
            ad::backward(ad::add(ad::mul_scalar(f, a), ad::mul_scalar(g, b)));
        } else {
            ad::backward(f);
            for (auto& v : x->grad.data) v *= a;
            auto x2 = ad::leaf(x->value, true);
            auto g2 = ad::sum_all(ad::gelu(x2));
            ad::backward(g2);
            for (int64_t i = 0; i < x->grad.numel(); ++i) x->grad.at(i) += b * x2->grad.at(i);
        }
        return x->grad;
    };
    auto lhs = make(true), rhs = make(false);
    for (int64_t i = 0; i < lhs.numel(); ++i)
        CHECK(lhs.at(i) == doctest::Approx(rhs.at(i)).epsilon(1e-10));
    (void)rng;
}

TEST_CASE("grad_check validates a linear layer tightly") {
    auto res = grad_check(
        [](const std::vector<DVar>& in) {
            return ad::sum_all(ad::linear(in[0], in[1], in[2]));
        },
        {{3, 4}, {4, 2}, {2}}, 21);
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("grad_check rejects non-scalar graphs") {
    CHECK_THROWS_AS(grad_check([](const std::vector<DVar>& in) { return in[0]; }, {{2, 2}}, 3),
                    ValueError);
}

TEST_CASE("registered op suites pass at 1e-4 over 3 seeds") {
    for (const auto& r : run_grad_suites("autodiff", 3)) {
        INFO(r.module << "/" << r.name);
        CHECK(r.max_err < 1e-4);
    }
}

TEST_CASE("adamw: zero gradient with zero decay is the identity") {
    AdamWConfig cfg;
    cfg.weight_decay = 0;
    AdamW<double> opt(cfg);
    auto p = ad::param(Tensor<double>::scalar(1.25), "w");
    p->ensure_grad();
    p->zero_grad();
    std::vector<std::pair<std::string, DVar>> params{{"w", p}};
    opt.step(params);
    CHECK(p->value.at(0) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("adamw single step matches the hand-evaluated update") {
    AdamWConfig cfg;  // lr 0.5e-3, beta 0.9/0.999, eps 1e-8, decay 0.01
    AdamW<double> opt(cfg);
    const double w0 = 0.8, g = 0.3;
    auto p = ad::param(Tensor<double>::scalar(w0), "w");
    p->ensure_grad();
    p->grad.at(0) = g;
    std::vector<std::pair<std::string, DVar>> params{{"w", p}};
    opt.step(params);
    const double m = (1 - cfg.beta1) * g, v = (1 - cfg.beta2) * g * g;
    const double mhat = m / (1 - cfg.beta1), vhat = v / (1 - cfg.beta2);
    const double expect = w0 - cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * w0);
    CHECK(p->value.at(0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("adamw decoupled decay shrinks by (1 - lr*decay) on zero gradient") {
    AdamWConfig cfg;
    AdamW<double> opt(cfg);
    auto p = ad::param(Tensor<double>::scalar(2.0), "w");
    p->ensure_grad();
    p->zero_grad();
    std::vector<std::pair<std::string, DVar>> params{{"w", p}};
    opt.step(params);
    CHECK(p->value.at(0) == doctest::Approx(2.0 * (1 - cfg.lr * cfg.weight_decay)).epsilon(1e-14));
}

TEST_CASE("adamw rejects missing and non-finite gradients by name") {
    AdamW<double> opt;
    auto p = ad::param(Tensor<double>::scalar(1.0), "theta");
    std::vector<std::pair<std::string, DVar>> params{{"theta", p}};
    try {
        opt.step(params);
        FAIL("expected missing-grad rejection");
    } catch (const ValueError& e) {
        CHECK(std::string(e.what()).find("theta") != std::string::npos);
    }
    p->ensure_grad();
    p->grad.at(0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(opt.step(params), ValueError);
}

TEST_CASE("adamw step counter increments by one per step") {
    AdamW<double> opt;
    auto p = ad::param(Tensor<double>::scalar(1.0), "w");
    p->ensure_grad();
    p->grad.at(0) = 0.1;
    std::vector<std::pair<std::string, DVar>> params{{"w", p}};
    for (int i = 1; i <= 3; ++i) {
        opt.step(params);
        CHECK(opt.step_count() == i);
    }
}
