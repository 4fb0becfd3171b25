// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CLGT_IMAGE_HPP
#define CLGT_IMAGE_HPP

#include <string>
#include <vector>

#include "clgt/common.hpp"

namespace clgt {

// HWC float image, values nominally in [0,1].
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_) {
        if (h_ <= 0 || w_ <= 0 || c_ <= 0) throw ShapeError("Image: nonpositive dims");
    }

    float& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }

    size_t size() const { return data.size(); }
    bool in_unit_range(float slack = 0.0f) const;
    void clamp01();
};

// Bilinear sample with edge clamping; (y,x) in pixel coordinates where
// integer coordinates address pixel centers.
float sample_bilinear(const Image& img, float y, float x, int ch);

// Bilinear sample with horizontal wrap-around (panoramas).
float sample_bilinear_wrap_x(const Image& img, float y, float x, int ch);

Image resize_bilinear(const Image& src, int h, int w);

// Mean absolute difference over all pixels/channels.
double mean_abs_diff(const Image& a, const Image& b);

// Pearson correlation across all pixels/channels.
double pearson(const Image& a, const Image& b);

// 8-bit RGB PNG I/O. Reading converts gray/alpha variants to RGB floats
// in [0,1]; writing quantizes with round-to-nearest.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

}  // namespace clgt

#endif
