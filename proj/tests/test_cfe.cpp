// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "clgt/cfe.hpp"
#include "clgt/dct.hpp"

using namespace clgt;

namespace {

Image random_image(int h, int w, int c, uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, c);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

}  // namespace

TEST_CASE("dct of a constant plane is DC-only with value c*sqrt(H*W)") {
    const int h = 6, w = 9;
    const double c = 0.37;
    auto spec = dct2(Tensor<double>::full({h, w}, c));
    CHECK(spec.at(0) == doctest::Approx(c * std::sqrt(double(h) * w)).epsilon(1e-12));
    for (int64_t i = 1; i < spec.numel(); ++i) CHECK(std::abs(spec.at(i)) < 1e-9);
}

TEST_CASE("dct matches the quadruple-sum oracle on random 8x8") {
    Rng rng(3);
    auto x = Tensor<double>::randn({8, 8}, rng);
    auto fast = dct2(x);
    auto direct = dct2_direct(x);
    for (int64_t i = 0; i < 64; ++i)
        CHECK(std::abs(fast.at(i) - direct.at(i)) < 1e-10);
}

TEST_CASE("dct roundtrip and Parseval hold at 64-bit") {
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        auto x = Tensor<double>::rand_uniform({32, 32}, rng);
        auto spec = dct2(x);
        auto back = idct2(spec);
        double e_pix = 0, e_coef = 0, maxdiff = 0;
        for (int64_t i = 0; i < x.numel(); ++i) {
            e_pix += x.at(i) * x.at(i);
            e_coef += spec.at(i) * spec.at(i);
            maxdiff = std::max(maxdiff, std::abs(back.at(i) - x.at(i)));
        }
        CHECK(maxdiff < 1e-6);
        CHECK(std::abs(e_pix - e_coef) / e_pix < 1e-6);
    }
}

TEST_CASE("dct rejects empty planes") {
    std::vector<double> empty;
    CHECK_THROWS_AS(dct2_plane<double>(empty.data(), empty.data(), 0, 3), ShapeError);
}

TEST_CASE("sobel: constant image has zero mean gradient") {
    Image img(8, 8, 3);
    for (auto& v : img.data) v = 0.42f;
    CHECK(sobel_gradient_mean(img, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("sobel: vertical step responds 4 at columns adjacent to the edge") {
    const int h = 7, w = 10, edge = 5;
    Image img(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(y, x, 0) = x >= edge ? 1.0f : 0.0f;
    auto mag = sobel_magnitude(img);
    for (int y = 1; y < h - 1; ++y) {
        CHECK(mag.at(y * w + edge - 1) == doctest::Approx(4.0));
        CHECK(mag.at(y * w + edge) == doctest::Approx(4.0));
        CHECK(mag.at(y * w + 2) == doctest::Approx(0.0));  // far from the edge
    }
}

TEST_CASE("sobel clamps to 1 on a maximally textured checkerboard") {
    Image img(8, 8, 1);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) img.at(y, x, 0) = static_cast<float>((x + y) % 2);
    CHECK(sobel_gradient_mean(img, 1e-3) == doctest::Approx(1.0));
}

TEST_CASE("sobel rejects out-of-range pixels") {
    Image img(4, 4, 1);
    img.at(0, 0, 0) = 1.5f;
    CHECK_THROWS_AS(sobel_gradient_mean(img, 0.5), ValueError);
}

TEST_CASE("adapt_radii: gbar 0 returns the initial radii exactly") {
    CamConfig cfg;
    auto r = adapt_radii(cfg, 0.0);
    CHECK(r[0] == 0.1);
    CHECK(r[1] == 0.3);
    CHECK(r[2] == 0.6);
}

TEST_CASE("adapt_radii: linear growth and clamping") {
    CamConfig cfg;
    cfg.kappa = 0.5;
    auto r = adapt_radii(cfg, 1.0);
    CHECK(r[0] == doctest::Approx(0.15));
    CHECK(r[1] == doctest::Approx(0.45));
    CHECK(r[2] == doctest::Approx(0.90));

    cfg.kappa = 2.0;
    r = adapt_radii(cfg, 1.0);
    CHECK(r[0] == doctest::Approx(0.3));
    CHECK(r[1] == doctest::Approx(0.9));
    CHECK(r[2] == doctest::Approx(0.95));  // clamp engages on r3
}

TEST_CASE("adapt_radii: monotone in gbar and widening causal band") {
    CamConfig cfg;
    std::array<double, 3> prev{0, 0, 0};
    double prev_width = 0;
    for (double g = 0.0; g <= 1.0; g += 0.1) {
        auto r = adapt_radii(cfg, g);
        CHECK(r[0] >= prev[0]);
        CHECK(r[1] >= prev[1]);
        CHECK(r[2] >= prev[2]);
        CHECK(r[1] - r[0] >= prev_width - 1e-15);
        prev = r;
        prev_width = r[1] - r[0];
    }
}

TEST_CASE("adapt_radii rejects invalid configs") {
    CamConfig cfg;
    cfg.r_init = {0.3, 0.2, 0.6};
    CHECK_THROWS_AS(adapt_radii(cfg, 0.5), ValueError);
    CamConfig cfg2;
    CHECK_THROWS_AS(adapt_radii(cfg2, 1.5), ValueError);
}

TEST_CASE("build_mask: labels partition the plane; DC is label 0; far corner label 3") {
    const std::array<double, 3> radii{0.1, 0.3, 0.6};
    auto mask = build_mask(64, 64, radii);
    CHECK(mask.at(0, 0) == 0);
    CHECK(mask.at(63, 63) == 3);  // rho = 1
    auto counts = mask.counts();
    CHECK(counts[0] + counts[1] + counts[2] + counts[3] == 64 * 64);
    // brute-force label scan
    std::array<int64_t, 4> expect{0, 0, 0, 0};
    for (int u = 0; u < 64; ++u)
        for (int v = 0; v < 64; ++v) {
            const double rho = std::sqrt(std::pow(u / 63.0, 2) + std::pow(v / 63.0, 2)) / std::sqrt(2.0);
            int label = 3;
            if (rho < radii[0]) label = 0;
            else if (rho < radii[1]) label = 1;
            else if (rho < radii[2]) label = 2;
            ++expect[static_cast<size_t>(label)];
            CHECK(mask.at(u, v) == label);
        }
    CHECK(counts == expect);
}

TEST_CASE("build_mask handles degenerate axes") {
    auto mask = build_mask(1, 1, {0.1, 0.3, 0.6});
    CHECK(mask.at(0, 0) == 0);
    auto row = build_mask(1, 16, {0.1, 0.3, 0.6});
    CHECK(row.at(0, 0) == 0);
    CHECK(row.at(0, 15) == 3);
}

TEST_CASE("cfe: zero noise scales reproduce the input") {
    CamConfig cfg;
    cfg.noise_scale = {0, 0, 0};
    auto img = random_image(16, 16, 3, 99);
    auto out = cfe_apply(img, cfg, 123);
    CHECK(mean_abs_diff(img, out) < 1e-5);
    for (size_t i = 0; i < img.data.size(); ++i) CHECK(std::abs(img.data[i] - out.data[i]) < 1e-5);
}

TEST_CASE("cfe: causal band passes through bit-for-bit before IDCT") {
    CamConfig cfg;
    auto img = random_image(16, 16, 1, 5);
    auto tr = cfe_spectra(img, cfg, 77);
    bool any_causal = false, any_changed = false;
    for (int64_t i = 0; i < 16 * 16; ++i) {
        if (tr.mask.labels[static_cast<size_t>(i)] == 1) {
            any_causal = true;
            CHECK(tr.mixed_spectrum.planes[0].at(i) == tr.input_spectrum.planes[0].at(i));
        } else if (tr.mixed_spectrum.planes[0].at(i) != tr.input_spectrum.planes[0].at(i)) {
            any_changed = true;
        }
    }
    CHECK(any_causal);
    CHECK(any_changed);
}

TEST_CASE("cfe is deterministic under a fixed seed and varies across seeds") {
    CamConfig cfg;
    auto img = random_image(12, 12, 3, 6);
    auto a = cfe_apply(img, cfg, 42);
    auto b = cfe_apply(img, cfg, 42);
    CHECK(a.data == b.data);
    auto c = cfe_apply(img, cfg, 43);
    CHECK(mean_abs_diff(a, c) > 1e-4);
}

TEST_CASE("cfe: Monte-Carlo mean of mixed spectra converges to the input") {
    // E[S * (1 + lambda n)] = S per coefficient; quick 1000-draw version of
    // the acceptance check.
    CamConfig cfg;
    auto img = random_image(8, 8, 1, 71);
    auto base = cfe_spectra(img, cfg, 0);
    const int draws = 1000;
    Tensor<double> acc({8, 8});
    for (int k = 0; k < draws; ++k) {
        auto mixed = cfe_mix_plane(base.input_spectrum.planes[0], base.mask, cfg.noise_scale,
                                   static_cast<uint64_t>(k), 0);
        for (int64_t i = 0; i < 64; ++i) acc.at(i) += mixed.at(i);
    }
    int checked = 0;
    for (int64_t i = 0; i < 64; ++i) {
        const double mean = acc.at(i) / draws;
        const double s = base.input_spectrum.planes[0].at(i);
        const uint8_t label = base.mask.labels[static_cast<size_t>(i)];
        const double lambda = label == 1 ? 0.0 : cfg.noise_scale[label == 0 ? 0 : (label == 2 ? 1 : 2)];
        const double se = std::abs(s) * lambda / std::sqrt(double(draws));
        if (se == 0) {
            CHECK(mean == doctest::Approx(s).epsilon(1e-6));
        } else {
            CHECK(std::abs(mean - s) < 5.0 * se);
            ++checked;
        }
    }
    CHECK(checked > 10);
}

TEST_CASE("cfe rejects invalid configs and out-of-range pixels") {
    CamConfig bad;
    bad.kappa = -1;
    auto img = random_image(8, 8, 1, 2);
    CHECK_THROWS_AS(cfe_apply(img, bad, 1), ValueError);
    CamConfig cfg;
    Image oob(4, 4, 1);
    oob.at(0, 0, 0) = -0.5f;
    CHECK_THROWS_AS(cfe_apply(oob, cfg, 1), ValueError);
}
