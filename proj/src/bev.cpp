// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/bev.hpp"

#include <cmath>

namespace clgt {

void BevConfig::validate() const {
    if (grid_n < 2) throw ValueError("BevConfig: grid_n must be >= 2");
    if (extent_m <= 0) throw ValueError("BevConfig: extent_m must be > 0");
    if (cam_height_m <= 0) throw ValueError("BevConfig: cam_height_m must be > 0");
    if (pano_h < 2 || pano_w < 2) throw ValueError("BevConfig: panorama dims must be >= 2");
    if (azimuth_offset_rad < 0 || azimuth_offset_rad >= 2.0 * M_PI)
        throw ValueError("BevConfig: azimuth offset must lie in [0, 2pi)");
}

PanoCoord bev_lookup(double x_m, double y_m, const BevConfig& cfg) {
    cfg.validate();
    const double r = std::sqrt(x_m * x_m + y_m * y_m);
    if (r == 0.0) throw ValueError("bev_lookup: nadir singularity at the origin");
    double theta = std::atan2(x_m, y_m) + cfg.azimuth_offset_rad;
    theta = std::fmod(theta, 2.0 * M_PI);
    if (theta < 0) theta += 2.0 * M_PI;
    const double phi = -std::atan(cfg.cam_height_m / r);
    PanoCoord out;
    out.u = theta / (2.0 * M_PI) * cfg.pano_w;
    out.v = (0.5 - phi / M_PI) * cfg.pano_h;
    return out;
}

Image panorama_to_bev(const Image& pano, const BevConfig& cfg_in) {
    BevConfig cfg = cfg_in;
    cfg.pano_h = pano.h;
    cfg.pano_w = pano.w;
    cfg.validate();
    const int n = cfg.grid_n;
    Image bev(n, n, pano.c);
    const double cell = 2.0 * cfg.extent_m / n;

    // bottom-row average for the nadir cell
    std::vector<float> bottom(static_cast<size_t>(pano.c), 0.0f);
    for (int ch = 0; ch < pano.c; ++ch) {
        double s = 0;
        for (int x = 0; x < pano.w; ++x) s += pano.at(pano.h - 1, x, ch);
        bottom[static_cast<size_t>(ch)] = static_cast<float>(s / pano.w);
    }

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = (j + 0.5) * cell - cfg.extent_m;
            const double y = cfg.extent_m - (i + 0.5) * cell;
            if (std::sqrt(x * x + y * y) < 1e-9 * cfg.extent_m) {
                for (int ch = 0; ch < pano.c; ++ch)
                    bev.at(i, j, ch) = bottom[static_cast<size_t>(ch)];
                continue;
            }
            const PanoCoord pc = bev_lookup(x, y, cfg);
            const float sy = static_cast<float>(pc.v - 0.5);
            const float sx = static_cast<float>(pc.u - 0.5);
            for (int ch = 0; ch < pano.c; ++ch)
                bev.at(i, j, ch) = sample_bilinear_wrap_x(pano, sy, sx, ch);
        }
    return bev;
}

void GroundTexture::to_texel(double x_m, double y_m, float& ty, float& tx) const {
    const int n = img.h;
    tx = static_cast<float>((x_m + extent_m) / (2.0 * extent_m) * n - 0.5);
    ty = static_cast<float>((extent_m - y_m) / (2.0 * extent_m) * n - 0.5);
}

Image render_panorama(const GroundTexture& ground, const BevConfig& cfg,
                      std::array<float, 3> sky_color) {
    cfg.validate();
    if (ground.img.h != ground.img.w) throw ValueError("render_panorama: ground texture must be square");
    const int hp = cfg.pano_h, wp = cfg.pano_w;
    Image pano(hp, wp, ground.img.c);
    const double max_dist = 20.0 * cfg.extent_m;

#pragma omp parallel for schedule(static)
    for (int r = 0; r < hp; ++r) {
        const double phi = (0.5 - (r + 0.5) / hp) * M_PI;
        if (phi >= 0) {  // sky half
            for (int ccol = 0; ccol < wp; ++ccol)
                for (int ch = 0; ch < pano.c; ++ch)
                    pano.at(r, ccol, ch) = sky_color[static_cast<size_t>(ch % 3)];
            continue;
        }
        const double dist = cfg.cam_height_m / std::tan(-phi);
        for (int ccol = 0; ccol < wp; ++ccol) {
            const double theta = (ccol + 0.5) / wp * 2.0 * M_PI - cfg.azimuth_offset_rad;
            const double x = dist * std::sin(theta);
            const double y = dist * std::cos(theta);
            const bool beyond =
                dist > max_dist || std::abs(x) > ground.extent_m || std::abs(y) > ground.extent_m;
            if (beyond) {
                for (int ch = 0; ch < pano.c; ++ch)
                    pano.at(r, ccol, ch) = ground.border_color[static_cast<size_t>(ch % 3)];
                continue;
            }
            float ty, tx;
            ground.to_texel(x, y, ty, tx);
            for (int ch = 0; ch < pano.c; ++ch)
                pano.at(r, ccol, ch) = sample_bilinear(ground.img, ty, tx, ch);
        }
    }
    return pano;
}

}  // namespace clgt
