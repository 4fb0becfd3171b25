// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural paired-scene generator. Geometry (roads, buildings, ground
// color) is a pure function of the geometry seed; photometric style
// (brightness, tint, sky gradient, noise) of the style seed, so the same
// layout can be re-styled. The street view renders the ground texture as an
// equirectangular panorama with style applied; the aerial and BEV ground
// truth are clean orthographic rasterizations of the same geometry.

#ifndef CLGT_SCENES_HPP
#define CLGT_SCENES_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "clgt/image.hpp"

namespace clgt {

struct RoadSegment {
    double x0, y0, x1, y1;  // meters
    double width;
};

struct BuildingRect {
    double cx, cy;     // center, meters
    double hw, hh;     // half extents
    int height_class;  // 1..3, shades the roof color
    std::array<float, 3> color;
};

struct StyleSpec {
    double brightness = 0;                    // [-0.2, 0.2]
    std::array<double, 3> tint{1, 1, 1};      // [0.9, 1.1]
    std::array<float, 3> sky_top{0.5f, 0.7f, 0.9f};
    std::array<float, 3> sky_horizon{0.8f, 0.85f, 0.9f};
    double noise_sigma = 0;                   // [0, 0.05]
};

struct SceneSpec {
    uint64_t seed = 0;
    uint64_t style_seed = 0;
    double extent_m = 20.0;
    std::array<float, 3> ground_color{};
    std::vector<RoadSegment> roads;
    std::vector<BuildingRect> buildings;
    StyleSpec style;
};

SceneSpec generate_scene(uint64_t seed);
SceneSpec generate_scene(uint64_t seed, uint64_t style_seed);

// Orthographic rasterization over [-extent, extent]^2 (row 0 = +y), 2x2
// supersampled. Pure geometry; no style.
Image rasterize_ground(const SceneSpec& spec, int n);

struct PairDims {
    int street_h = 128, street_w = 256;
    int aerial_n = 128;
    int bev_n = 64;
};

struct PairSample {
    int id = 0;
    Image street;   // styled panorama
    Image aerial;   // clean top-down (mild geometry-seeded tint)
    Image bev_gt;   // clean ground rasterization at BEV size
    SceneSpec spec;
};

PairSample render_pair(const SceneSpec& spec, const PairDims& dims);

// Query corruptions; severity scales intensity monotonically.
enum class CorruptionKind { GaussianNoise, Brightness, Fog, Snow, MotionBlur };

extern const std::array<CorruptionKind, 5> kAllCorruptions;

CorruptionKind corruption_from_string(const std::string& s);
const char* corruption_name(CorruptionKind k);

Image corrupt(const Image& img, CorruptionKind kind, int severity, uint64_t seed);

// Dataset files: NNNNNN_street.png / _aerial.png / _bev.png plus a
// line-delimited JSON manifest with id, seeds and style fields.
struct DatasetEntry {
    int id = 0;
    uint64_t seed = 0, style_seed = 0;
    double brightness = 0, noise_sigma = 0;
    std::array<double, 3> tint{1, 1, 1};
    std::string street_png, aerial_png, bev_png;
};

void generate_dataset(const std::string& dir, int count, uint64_t seed,
                      const PairDims& dims = {});
std::vector<DatasetEntry> read_manifest(const std::string& dir);

}  // namespace clgt

#endif
