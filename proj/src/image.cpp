// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace clgt {

bool Image::in_unit_range(float slack) const {
    for (float v : data)
        if (!(v >= -slack && v <= 1.0f + slack)) return false;
    return true;
}

void Image::clamp01() {
    for (float& v : data) v = std::min(1.0f, std::max(0.0f, v));
}

float sample_bilinear(const Image& img, float y, float x, int ch) {
    const float yc = std::min(std::max(y, 0.0f), static_cast<float>(img.h - 1));
    const float xc = std::min(std::max(x, 0.0f), static_cast<float>(img.w - 1));
    const int y0 = static_cast<int>(yc);
    const int x0 = static_cast<int>(xc);
    const int y1 = std::min(y0 + 1, img.h - 1);
    const int x1 = std::min(x0 + 1, img.w - 1);
    const float fy = yc - y0, fx = xc - x0;
    return (1 - fy) * ((1 - fx) * img.at(y0, x0, ch) + fx * img.at(y0, x1, ch)) +
           fy * ((1 - fx) * img.at(y1, x0, ch) + fx * img.at(y1, x1, ch));
}

float sample_bilinear_wrap_x(const Image& img, float y, float x, int ch) {
    const float yc = std::min(std::max(y, 0.0f), static_cast<float>(img.h - 1));
    float xw = std::fmod(x, static_cast<float>(img.w));
    if (xw < 0) xw += img.w;
    const int y0 = static_cast<int>(yc);
    const int y1 = std::min(y0 + 1, img.h - 1);
    const int x0 = static_cast<int>(xw);
    const int x1 = (x0 + 1) % img.w;
    const float fy = yc - y0, fx = xw - x0;
    return (1 - fy) * ((1 - fx) * img.at(y0, x0, ch) + fx * img.at(y0, x1, ch)) +
           fy * ((1 - fx) * img.at(y1, x0, ch) + fx * img.at(y1, x1, ch));
}

Image resize_bilinear(const Image& src, int h, int w) {
    Image out(h, w, src.c);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float sy = (y + 0.5f) * src.h / h - 0.5f;
            const float sx = (x + 0.5f) * src.w / w - 0.5f;
            for (int ch = 0; ch < src.c; ++ch) out.at(y, x, ch) = sample_bilinear(src, sy, sx, ch);
        }
    return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w || a.c != b.c)
        throw ShapeError("mean_abs_diff: image dims differ");
    double s = 0;
    for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.data.size());
}

double pearson(const Image& a, const Image& b) {
    if (a.data.size() != b.data.size()) throw ShapeError("pearson: image sizes differ");
    const size_t n = a.data.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a.data[i];
        mb += b.data[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < n; ++i) {
        const double da = a.data[i] - ma, db = b.data[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0 || vb == 0) return 0.0;
    return cov / std::sqrt(va * vb);
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace

Image read_png(const std::string& path) {
    std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ValueError("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ValueError("read_png: init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ValueError("read_png: info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ValueError("read_png: decode error in " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    std::vector<png_byte> rowbuf(static_cast<size_t>(w) * 3);
    Image img(static_cast<int>(h), static_cast<int>(w), 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, rowbuf.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(static_cast<int>(y), static_cast<int>(x), ch) =
                    rowbuf[x * 3 + static_cast<size_t>(ch)] / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::string& path, const Image& img) {
    if (img.c != 1 && img.c != 3) throw ValueError("write_png: need 1 or 3 channels");
    std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw ValueError("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ValueError("write_png: init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ValueError("write_png: info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ValueError("write_png: encode error for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> rowbuf(static_cast<size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                const float v = img.at(y, x, img.c == 1 ? 0 : ch);
                const float q = std::min(1.0f, std::max(0.0f, v));
                rowbuf[x * 3 + static_cast<size_t>(ch)] =
                    static_cast<png_byte>(std::lround(q * 255.0f));
            }
        png_write_row(png, rowbuf.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace clgt
