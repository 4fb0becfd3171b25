// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ground-plane geometry between equirectangular street panoramas and
// top-down views. Conventions, pinned for all tests:
//   azimuth   theta = atan2(x, y) + offset, wrapped to [0, 2pi)
//   elevation phi   = -atan(cam_height / ground_distance), in (-pi/2, 0)
//   u = theta / 2pi * W_p;  v = (0.5 - phi/pi) * H_p  (v=0 is zenith)
// Panorama pixel (r,c) covers azimuth (c+0.5)/W*2pi and the matching
// elevation band, i.e. continuous coordinates are index + 0.5.

#ifndef CLGT_BEV_HPP
#define CLGT_BEV_HPP

#include <array>

#include "clgt/image.hpp"

namespace clgt {

struct BevConfig {
    int grid_n = 128;
    double extent_m = 20.0;
    double cam_height_m = 2.0;
    int pano_h = 256;
    int pano_w = 512;
    double azimuth_offset_rad = 0.0;

    void validate() const;
};

struct PanoCoord {
    double u = 0, v = 0;
};

// Continuous panorama coordinates of ground point (x_m, y_m). The origin
// (camera nadir) has undefined azimuth and is rejected.
PanoCoord bev_lookup(double x_m, double y_m, const BevConfig& cfg);

// Back-projects a panorama onto the ground grid. Cell (i,j) is centered at
// x = (j+0.5)/N*2E - E and y = E - (i+0.5)/N*2E (row 0 farthest forward).
// A cell centered on the nadir takes the bottom-row panorama average.
Image panorama_to_bev(const Image& pano, const BevConfig& cfg);

// Square ground texture in meter coordinates, same cell convention as the
// BEV grid. Points beyond the texture (or beyond 20x the config extent in
// the renderer) read the border color.
struct GroundTexture {
    Image img;
    double extent_m = 20.0;
    std::array<float, 3> border_color{0, 0, 0};

    // Continuous texel coordinates of a ground point.
    void to_texel(double x_m, double y_m, float& ty, float& tx) const;
};

// Forward renderer: sky above the horizon, ray-cast ground below. Serves as
// the projector oracle and as the street renderer for synthetic scenes.
Image render_panorama(const GroundTexture& ground, const BevConfig& cfg,
                      std::array<float, 3> sky_color);

}  // namespace clgt

#endif
