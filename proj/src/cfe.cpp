// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/cfe.hpp"

#include "clgt/dct.hpp"
#include "clgt/rng.hpp"

namespace clgt {

void CamConfig::validate() const {
    if (!(r_init[0] > 0 && r_init[0] < r_init[1] && r_init[1] < r_init[2]))
        throw ValueError("CamConfig: radii must satisfy 0 < r1 < r2 < r3");
    if (!(r_init[2] <= r_max && r_max <= 1.0))
        throw ValueError("CamConfig: need r3 <= r_max <= 1");
    if (kappa < 0) throw ValueError("CamConfig: kappa must be >= 0");
    if (grad_norm_c <= 0) throw ValueError("CamConfig: grad_norm_c must be > 0");
    for (double s : noise_scale)
        if (s < 0) throw ValueError("CamConfig: noise scales must be >= 0");
}

std::array<int64_t, 4> RegionMask::counts() const {
    std::array<int64_t, 4> c{0, 0, 0, 0};
    for (uint8_t l : labels) ++c[l];
    return c;
}

Tensor<float> sobel_magnitude(const Image& img) {
    if (img.c != 1 && img.c != 3)
        throw ValueError("sobel: expected 1 or 3 channels, got " + std::to_string(img.c));
    const int h = img.h, w = img.w;
    // luminance
    std::vector<float> lum(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            lum[static_cast<size_t>(y) * w + x] =
                img.c == 1 ? img.at(y, x, 0)
                           : 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) +
                                 0.114f * img.at(y, x, 2);
    auto pix = [&](int y, int x) {
        y = std::min(std::max(y, 0), h - 1);  // replicate border
        x = std::min(std::max(x, 0), w - 1);
        return lum[static_cast<size_t>(y) * w + x];
    };
    Tensor<float> mag({h, w});
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float gx = -pix(y - 1, x - 1) + pix(y - 1, x + 1) - 2 * pix(y, x - 1) +
                             2 * pix(y, x + 1) - pix(y + 1, x - 1) + pix(y + 1, x + 1);
            const float gy = -pix(y - 1, x - 1) - 2 * pix(y - 1, x) - pix(y - 1, x + 1) +
                             pix(y + 1, x - 1) + 2 * pix(y + 1, x) + pix(y + 1, x + 1);
            mag.at(static_cast<int64_t>(y) * w + x) = std::sqrt(gx * gx + gy * gy);
        }
    return mag;
}

double sobel_gradient_mean(const Image& img, double grad_norm_c) {
    if (!img.in_unit_range())
        throw ValueError("sobel_gradient_mean: pixel values outside [0,1]");
    if (grad_norm_c <= 0) throw ValueError("sobel_gradient_mean: grad_norm_c must be > 0");
    const auto mag = sobel_magnitude(img);
    double s = 0;
    for (float v : mag.data) s += v;
    const double mean = s / static_cast<double>(mag.numel());
    return std::min(1.0, std::max(0.0, mean / grad_norm_c));
}

std::array<double, 3> adapt_radii(const CamConfig& cfg, double gbar) {
    cfg.validate();
    if (!(gbar >= 0.0 && gbar <= 1.0))
        throw ValueError("adapt_radii: gbar must lie in [0,1]");
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i)
        out[static_cast<size_t>(i)] =
            std::min(cfg.r_init[static_cast<size_t>(i)] * (1.0 + cfg.kappa * gbar), cfg.r_max);
    return out;
}

double mask_radius(int u, int v, int h, int w) {
    const double ru = h > 1 ? static_cast<double>(u) / (h - 1) : 0.0;
    const double rv = w > 1 ? static_cast<double>(v) / (w - 1) : 0.0;
    return std::sqrt(ru * ru + rv * rv) / std::sqrt(2.0);
}

RegionMask build_mask(int h, int w, const std::array<double, 3>& radii) {
    if (h < 1 || w < 1) throw ShapeError("build_mask: empty plane");
    if (!(radii[0] < radii[1] && radii[1] < radii[2]))
        throw ValueError("build_mask: radii must be strictly increasing");
    RegionMask m;
    m.h = h;
    m.w = w;
    m.labels.resize(static_cast<size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            const double rho = mask_radius(u, v, h, w);
            uint8_t label = 3;
            if (rho < radii[0])
                label = 0;
            else if (rho < radii[1])
                label = 1;
            else if (rho < radii[2])
                label = 2;
            m.labels[static_cast<size_t>(u) * w + v] = label;
        }
    return m;
}

Spectrum image_to_spectrum(const Image& img) {
    Spectrum spec;
    spec.h = img.h;
    spec.w = img.w;
    spec.channels = img.c;
    spec.planes.reserve(static_cast<size_t>(img.c));
    std::vector<float> plane(static_cast<size_t>(img.h) * img.w);
    for (int ch = 0; ch < img.c; ++ch) {
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                plane[static_cast<size_t>(y) * img.w + x] = img.at(y, x, ch);
        Tensor<float> out({img.h, img.w});
        dct2_plane(plane.data(), out.ptr(), img.h, img.w);
        spec.planes.push_back(std::move(out));
    }
    return spec;
}

Image spectrum_to_image(const Spectrum& spec, bool clamp) {
    Image img(spec.h, spec.w, spec.channels);
    std::vector<float> plane(static_cast<size_t>(spec.h) * spec.w);
    for (int ch = 0; ch < spec.channels; ++ch) {
        idct2_plane(spec.planes[static_cast<size_t>(ch)].ptr(), plane.data(), spec.h, spec.w);
        for (int y = 0; y < spec.h; ++y)
            for (int x = 0; x < spec.w; ++x) img.at(y, x, ch) = plane[static_cast<size_t>(y) * spec.w + x];
    }
    if (clamp) img.clamp01();
    return img;
}

Tensor<float> cfe_mix_plane(const Tensor<float>& spec_plane, const RegionMask& mask,
                            const std::array<double, 3>& noise_scale, uint64_t seed,
                            uint64_t channel_tag) {
    if (spec_plane.rank() != 2 || spec_plane.dim(0) != mask.h || spec_plane.dim(1) != mask.w)
        throw_shape_mismatch("cfe_mix_plane", spec_plane.shape, {mask.h, mask.w});
    Tensor<float> out(spec_plane.shape);
    const int64_t n = spec_plane.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const uint8_t label = mask.labels[static_cast<size_t>(i)];
        if (label == 1) {  // causal band passes bit-for-bit
            out.at(i) = spec_plane.at(i);
            continue;
        }
        const double lambda = noise_scale[label == 0 ? 0 : (label == 2 ? 1 : 2)];
        Rng rng(rng_fold(seed, channel_tag, static_cast<uint64_t>(i)));
        out.at(i) = static_cast<float>(spec_plane.at(i) * (1.0 + lambda * rng.normal()));
    }
    return out;
}

CfeTrace cfe_spectra(const Image& img, const CamConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (!img.in_unit_range()) throw ValueError("cfe: pixel values outside [0,1]");
    CfeTrace tr;
    tr.gbar = sobel_gradient_mean(img, cfg.grad_norm_c);
    tr.radii = adapt_radii(cfg, tr.gbar);
    tr.mask = build_mask(img.h, img.w, tr.radii);
    tr.input_spectrum = image_to_spectrum(img);
    tr.mixed_spectrum.h = img.h;
    tr.mixed_spectrum.w = img.w;
    tr.mixed_spectrum.channels = img.c;
    for (int ch = 0; ch < img.c; ++ch)
        tr.mixed_spectrum.planes.push_back(
            cfe_mix_plane(tr.input_spectrum.planes[static_cast<size_t>(ch)], tr.mask,
                          cfg.noise_scale, seed, static_cast<uint64_t>(ch)));
    return tr;
}

Image cfe_apply(const Image& img, const CamConfig& cfg, uint64_t seed) {
    const CfeTrace tr = cfe_spectra(img, cfg, seed);
    return spectrum_to_image(tr.mixed_spectrum, /*clamp=*/true);
}

}  // namespace clgt
