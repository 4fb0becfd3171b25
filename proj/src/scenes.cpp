// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/scenes.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "clgt/bev.hpp"
#include "clgt/rng.hpp"

namespace clgt {

namespace {

constexpr uint64_t kGeoTag = 0x47454F;    // geometry stream
constexpr uint64_t kStyleTag = 0x535459;  // style stream
constexpr uint64_t kAerialTag = 0x414552;

double point_segment_dist(double px, double py, const RoadSegment& r) {
    const double dx = r.x1 - r.x0, dy = r.y1 - r.y0;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((px - r.x0) * dx + (py - r.y0) * dy) / len2 : 0.0;
    t = std::min(1.0, std::max(0.0, t));
    const double cx = r.x0 + t * dx, cy = r.y0 + t * dy;
    return std::sqrt((px - cx) * (px - cx) + (py - cy) * (py - cy));
}

bool rect_touches_road(const BuildingRect& b, const std::vector<RoadSegment>& roads,
                       double margin) {
    for (const auto& r : roads) {
        // sample the rect border + center against the segment
        for (int sy = -1; sy <= 1; ++sy)
            for (int sx = -1; sx <= 1; ++sx) {
                const double px = b.cx + sx * b.hw, py = b.cy + sy * b.hh;
                if (point_segment_dist(px, py, r) < r.width * 0.5 + margin) return true;
            }
    }
    return false;
}

StyleSpec sample_style(uint64_t style_seed) {
    Rng rng(rng_fold(style_seed, kStyleTag));
    StyleSpec st;
    st.brightness = rng.uniform(-0.2, 0.2);
    for (auto& t : st.tint) t = rng.uniform(0.9, 1.1);
    st.sky_top = {static_cast<float>(rng.uniform(0.35, 0.6)),
                  static_cast<float>(rng.uniform(0.55, 0.75)),
                  static_cast<float>(rng.uniform(0.8, 1.0))};
    st.sky_horizon = {static_cast<float>(rng.uniform(0.7, 0.9)),
                      static_cast<float>(rng.uniform(0.75, 0.9)),
                      static_cast<float>(rng.uniform(0.8, 0.95))};
    st.noise_sigma = rng.uniform(0.0, 0.05);
    return st;
}

}  // namespace

SceneSpec generate_scene(uint64_t seed) { return generate_scene(seed, seed); }

SceneSpec generate_scene(uint64_t seed, uint64_t style_seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.style_seed = style_seed;
    Rng rng(rng_fold(seed, kGeoTag));

    spec.ground_color = {static_cast<float>(rng.uniform(0.25, 0.42)),
                         static_cast<float>(rng.uniform(0.38, 0.55)),
                         static_cast<float>(rng.uniform(0.22, 0.38))};

    const double e = spec.extent_m;
    const int n_roads = 2 + static_cast<int>(rng.uniform_index(3));  // 2..4
    // Through-road guaranteed to pass within 5 m of the camera at the origin.
    {
        const double angle = rng.uniform(0.0, M_PI);
        const double offset = rng.uniform(-2.0, 2.0);
        const double nx = -std::sin(angle), ny = std::cos(angle);  // unit normal
        const double px = offset * nx, py = offset * ny;
        const double dx = std::cos(angle), dy = std::sin(angle);
        const double len = 1.6 * e;
        spec.roads.push_back({px - len * dx, py - len * dy, px + len * dx, py + len * dy,
                              rng.uniform(3.0, 6.0)});
    }
    for (int i = 1; i < n_roads; ++i) {
        const double angle = rng.uniform(0.0, M_PI);
        const double cx = rng.uniform(-0.7 * e, 0.7 * e);
        const double cy = rng.uniform(-0.7 * e, 0.7 * e);
        const double half = rng.uniform(0.5 * e, 1.4 * e);
        spec.roads.push_back({cx - half * std::cos(angle), cy - half * std::sin(angle),
                              cx + half * std::cos(angle), cy + half * std::sin(angle),
                              rng.uniform(2.0, 5.0)});
    }

    const int n_buildings = 3 + static_cast<int>(rng.uniform_index(6));  // 3..8
    for (int i = 0; i < n_buildings; ++i) {
        BuildingRect b{};
        bool placed = false;
        double shrink = 1.0;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            b.cx = rng.uniform(-0.8 * e, 0.8 * e);
            b.cy = rng.uniform(-0.8 * e, 0.8 * e);
            b.hw = shrink * rng.uniform(1.5, 4.0);
            b.hh = shrink * rng.uniform(1.5, 4.0);
            placed = !rect_touches_road(b, spec.roads, 0.5);
            if (attempt % 40 == 39) shrink *= 0.7;
        }
        if (!placed) continue;
        b.height_class = 1 + static_cast<int>(rng.uniform_index(3));
        const float shade = 0.35f + 0.15f * b.height_class;
        b.color = {static_cast<float>(shade + rng.uniform(-0.08, 0.24)),
                   static_cast<float>(shade + rng.uniform(-0.12, 0.08)),
                   static_cast<float>(shade + rng.uniform(-0.12, 0.08))};
        spec.buildings.push_back(b);
    }

    spec.style = sample_style(style_seed);
    return spec;
}

namespace {

void shade_point(const SceneSpec& spec, double x, double y, float* rgb) {
    rgb[0] = spec.ground_color[0];
    rgb[1] = spec.ground_color[1];
    rgb[2] = spec.ground_color[2];
    for (const auto& r : spec.roads) {
        const double d = point_segment_dist(x, y, r);
        if (d <= r.width * 0.5) {
            const bool lane = d <= 0.18;
            rgb[0] = lane ? 0.85f : 0.18f;
            rgb[1] = lane ? 0.85f : 0.18f;
            rgb[2] = lane ? 0.75f : 0.20f;
        }
    }
    for (const auto& b : spec.buildings) {
        if (std::abs(x - b.cx) <= b.hw && std::abs(y - b.cy) <= b.hh) {
            rgb[0] = b.color[0];
            rgb[1] = b.color[1];
            rgb[2] = b.color[2];
        }
    }
}

}  // namespace

Image rasterize_ground(const SceneSpec& spec, int n) {
    Image img(n, n, 3);
    const double e = spec.extent_m;
    const double cell = 2.0 * e / n;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            float acc[3] = {0, 0, 0};
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx) {
                    const double x = (j + 0.25 + 0.5 * sx) * cell - e;
                    const double y = e - (i + 0.25 + 0.5 * sy) * cell;
                    float rgb[3];
                    shade_point(spec, x, y, rgb);
                    acc[0] += rgb[0];
                    acc[1] += rgb[1];
                    acc[2] += rgb[2];
                }
            for (int ch = 0; ch < 3; ++ch) img.at(i, j, ch) = acc[ch] * 0.25f;
        }
    img.clamp01();
    return img;
}

PairSample render_pair(const SceneSpec& spec, const PairDims& dims) {
    PairSample out;
    out.spec = spec;

    // aerial: clean geometry with a mild tint tied to the geometry seed
    out.aerial = rasterize_ground(spec, dims.aerial_n);
    {
        Rng rng(rng_fold(spec.seed, kAerialTag));
        float tint[3];
        for (auto& t : tint) t = static_cast<float>(1.0 + 0.03 * rng.uniform(-1.0, 1.0));
        for (int y = 0; y < out.aerial.h; ++y)
            for (int x = 0; x < out.aerial.w; ++x)
                for (int ch = 0; ch < 3; ++ch) out.aerial.at(y, x, ch) *= tint[ch];
        out.aerial.clamp01();
    }

    out.bev_gt = rasterize_ground(spec, dims.bev_n);

    // street: panorama of the ground texture, then style
    GroundTexture tex;
    tex.img = rasterize_ground(spec, 256);
    tex.extent_m = spec.extent_m;
    tex.border_color = spec.ground_color;
    BevConfig cam;
    cam.pano_h = dims.street_h;
    cam.pano_w = dims.street_w;
    cam.extent_m = spec.extent_m;
    cam.cam_height_m = 2.0;
    Image pano = render_panorama(tex, cam, spec.style.sky_horizon);

    const StyleSpec& st = spec.style;
    const int horizon = pano.h / 2;
    for (int y = 0; y < horizon; ++y) {  // sky gradient above the horizon
        const float t = horizon > 1 ? static_cast<float>(y) / (horizon - 1) : 0.0f;
        for (int x = 0; x < pano.w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                pano.at(y, x, ch) =
                    (1 - t) * st.sky_top[static_cast<size_t>(ch)] + t * st.sky_horizon[static_cast<size_t>(ch)];
    }
    Rng noise_rng(rng_fold(spec.style_seed, kStyleTag, 7));
    for (int y = 0; y < pano.h; ++y)
        for (int x = 0; x < pano.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                double v = pano.at(y, x, ch);
                v = v * st.tint[static_cast<size_t>(ch)] + st.brightness;
                if (st.noise_sigma > 0) v += st.noise_sigma * noise_rng.normal();
                pano.at(y, x, ch) = static_cast<float>(v);
            }
    pano.clamp01();
    out.street = std::move(pano);
    return out;
}

// ---------------------------------------------------------------------------
// Corruptions
// ---------------------------------------------------------------------------

const std::array<CorruptionKind, 5> kAllCorruptions = {
    CorruptionKind::GaussianNoise, CorruptionKind::Brightness, CorruptionKind::Fog,
    CorruptionKind::Snow, CorruptionKind::MotionBlur};

CorruptionKind corruption_from_string(const std::string& s) {
    if (s == "gaussian_noise") return CorruptionKind::GaussianNoise;
    if (s == "brightness") return CorruptionKind::Brightness;
    if (s == "fog") return CorruptionKind::Fog;
    if (s == "snow") return CorruptionKind::Snow;
    if (s == "motion_blur") return CorruptionKind::MotionBlur;
    throw ValueError("unknown corruption kind: " + s);
}

const char* corruption_name(CorruptionKind k) {
    switch (k) {
        case CorruptionKind::GaussianNoise: return "gaussian_noise";
        case CorruptionKind::Brightness: return "brightness";
        case CorruptionKind::Fog: return "fog";
        case CorruptionKind::Snow: return "snow";
        case CorruptionKind::MotionBlur: return "motion_blur";
    }
    return "?";
}

namespace {

Image box_blur_3x3(const Image& img) {
    Image out(img.h, img.w, img.c);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) {
                float s = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = std::min(std::max(y + dy, 0), img.h - 1);
                        const int xx = std::min(std::max(x + dx, 0), img.w - 1);
                        s += img.at(yy, xx, ch);
                    }
                out.at(y, x, ch) = s / 9.0f;
            }
    return out;
}

}  // namespace

Image corrupt(const Image& img, CorruptionKind kind, int severity, uint64_t seed) {
    if (severity < 1 || severity > 5)
        throw ValueError("corrupt: severity must lie in 1..5, got " + std::to_string(severity));
    if (!img.in_unit_range()) throw ValueError("corrupt: pixel values outside [0,1]");
    Image out = img;
    Rng rng(rng_fold(seed, static_cast<uint64_t>(kind) + 1));
    switch (kind) {
        case CorruptionKind::GaussianNoise: {
            const double sigma = 0.02 * severity;
            for (auto& v : out.data) v = static_cast<float>(v + sigma * rng.normal());
            break;
        }
        case CorruptionKind::Brightness: {
            const float delta = 0.1f * severity;
            for (auto& v : out.data) v += delta;
            break;
        }
        case CorruptionKind::Fog: {
            const float a = 0.1f * severity;
            for (auto& v : out.data) v = (1 - a) * v + a;
            break;
        }
        case CorruptionKind::Snow: {
            const double density = 0.01 * severity;
            for (int y = 0; y < out.h; ++y)
                for (int x = 0; x < out.w; ++x)
                    if (rng.uniform() < density)
                        for (int ch = 0; ch < out.c; ++ch) out.at(y, x, ch) = 1.0f;
            out = box_blur_3x3(out);
            break;
        }
        case CorruptionKind::MotionBlur: {
            const int len = 2 * severity + 1;
            const int half = len / 2;
            Image blurred(out.h, out.w, out.c);
#pragma omp parallel for schedule(static)
            for (int y = 0; y < out.h; ++y)
                for (int x = 0; x < out.w; ++x)
                    for (int ch = 0; ch < out.c; ++ch) {
                        float s = 0;
                        for (int dx = -half; dx <= half; ++dx) {
                            const int xx = std::min(std::max(x + dx, 0), out.w - 1);
                            s += out.at(y, xx, ch);
                        }
                        blurred.at(y, x, ch) = s / len;
                    }
            out = std::move(blurred);
            break;
        }
    }
    out.clamp01();
    return out;
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

namespace {

std::string sample_name(int id, const char* kind) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d_%s.png", id, kind);
    return buf;
}

}  // namespace

void generate_dataset(const std::string& dir, int count, uint64_t seed, const PairDims& dims) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
    if (!manifest) throw ValueError("generate_dataset: cannot write manifest in " + dir);
    for (int i = 0; i < count; ++i) {
        const uint64_t scene_seed = rng_fold(seed, static_cast<uint64_t>(i));
        SceneSpec spec = generate_scene(scene_seed);
        PairSample pair = render_pair(spec, dims);
        pair.id = i;
        const std::string street = sample_name(i, "street");
        const std::string aerial = sample_name(i, "aerial");
        const std::string bev = sample_name(i, "bev");
        write_png((fs::path(dir) / street).string(), pair.street);
        write_png((fs::path(dir) / aerial).string(), pair.aerial);
        write_png((fs::path(dir) / bev).string(), pair.bev_gt);
        nlohmann::json rec{{"id", i},
                           {"seed", scene_seed},
                           {"style_seed", spec.style_seed},
                           {"brightness", spec.style.brightness},
                           {"tint", spec.style.tint},
                           {"noise_sigma", spec.style.noise_sigma},
                           {"street", street},
                           {"aerial", aerial},
                           {"bev", bev}};
        manifest << rec.dump() << "\n";
    }
}

std::vector<DatasetEntry> read_manifest(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.jsonl");
    if (!in) throw ValueError("read_manifest: no manifest.jsonl in " + dir);
    std::vector<DatasetEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto rec = nlohmann::json::parse(line);
        DatasetEntry e;
        e.id = rec.at("id").get<int>();
        e.seed = rec.at("seed").get<uint64_t>();
        e.style_seed = rec.at("style_seed").get<uint64_t>();
        e.brightness = rec.at("brightness").get<double>();
        e.noise_sigma = rec.at("noise_sigma").get<double>();
        e.tint = rec.at("tint").get<std::array<double, 3>>();
        e.street_png = (fs::path(dir) / rec.at("street").get<std::string>()).string();
        e.aerial_png = (fs::path(dir) / rec.at("aerial").get<std::string>()).string();
        e.bev_png = (fs::path(dir) / rec.at("bev").get<std::string>()).string();
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace clgt
