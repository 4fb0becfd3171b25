// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Causal feature extraction in the DCT domain. A content-aware mask splits
// each channel spectrum into four radial bands anchored at the DC corner;
// the mid band (region 1) passes through untouched while the others are
// randomized multiplicatively, S -> S * (1 + lambda_k * n), n ~ N(0,1),
// one seeded draw per coefficient. Band radii grow linearly with the mean
// Sobel gradient magnitude of the input.

#ifndef CLGT_CFE_HPP
#define CLGT_CFE_HPP

#include <array>
#include <cstdint>

#include "clgt/image.hpp"
#include "clgt/tensor.hpp"

namespace clgt {

struct CamConfig {
    std::array<double, 3> r_init{0.1, 0.3, 0.6};
    double kappa = 0.5;
    double grad_norm_c = 0.5;
    // Multipliers for regions 0 (low), 2 (mid-high), 3 (high).
    std::array<double, 3> noise_scale{1.0, 0.5, 1.0};
    double r_max = 0.95;

    void validate() const;
};

// Four-band radial label plane over DCT coefficients.
// 0: [0,r1)  1: [r1,r2)  2: [r2,r3)  3: [r3,inf)
struct RegionMask {
    int h = 0, w = 0;
    std::vector<uint8_t> labels;

    uint8_t at(int u, int v) const { return labels[static_cast<size_t>(u) * w + v]; }
    std::array<int64_t, 4> counts() const;
};

// Per-channel DCT coefficient planes of an image.
struct Spectrum {
    int h = 0, w = 0, channels = 0;
    std::vector<Tensor<float>> planes;
};

// Mean Sobel gradient magnitude, normalized by cfg.grad_norm_c and clamped
// to [0,1]. Pixels must lie in [0,1]; 3-channel input uses Rec.601 luminance.
double sobel_gradient_mean(const Image& img, double grad_norm_c);

// Raw (unnormalized) Sobel magnitude plane, replicate padding. Test hook.
Tensor<float> sobel_magnitude(const Image& img);

std::array<double, 3> adapt_radii(const CamConfig& cfg, double gbar);

// Normalized radial distance from the DC corner; degenerate axes count 0.
double mask_radius(int u, int v, int h, int w);

RegionMask build_mask(int h, int w, const std::array<double, 3>& radii);

Spectrum image_to_spectrum(const Image& img);
Image spectrum_to_image(const Spectrum& spec, bool clamp);

// Randomizes non-causal bands of one coefficient plane. The noise stream is
// addressed by (seed, channel_tag, coefficient index).
Tensor<float> cfe_mix_plane(const Tensor<float>& spec_plane, const RegionMask& mask,
                            const std::array<double, 3>& noise_scale, uint64_t seed,
                            uint64_t channel_tag);

// Full intervention products, pre-IDCT; used by tests and cfe_apply.
struct CfeTrace {
    double gbar = 0;
    std::array<double, 3> radii{};
    RegionMask mask;
    Spectrum input_spectrum;
    Spectrum mixed_spectrum;
};

CfeTrace cfe_spectra(const Image& img, const CamConfig& cfg, uint64_t seed);

// The do-operation: DCT, band randomization, inverse DCT, clamp to [0,1].
Image cfe_apply(const Image& img, const CamConfig& cfg, uint64_t seed);

}  // namespace clgt

#endif
