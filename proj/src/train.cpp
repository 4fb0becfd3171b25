// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/train.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "clgt/dct.hpp"

namespace clgt {

namespace {

constexpr uint64_t kShuffleTag = 0x53485546;
constexpr uint64_t kCfeTag = 0x434645;
constexpr uint64_t kBernoulliTag = 0x4245524E;

Image chw_to_image(const Tensor<float>& t) {
    Image img(t.dim(1), t.dim(2), t.dim(0));
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                img.at(y, x, ch) = t.at((static_cast<int64_t>(ch) * img.h + y) * img.w + x);
    return img;
}

}  // namespace

TrainSample prepare_sample(const Image& street, const Image& aerial, const ModelConfig& cfg) {
    TrainSample s;
    const int hw = cfg.input_hw;
    const Image street_in = resize_bilinear(street, hw, hw);
    s.street = image_to_chw(street_in);
    s.aerial = image_to_chw(resize_bilinear(aerial, hw, hw));
    BevConfig bev_cfg;
    bev_cfg.grid_n = hw;
    bev_cfg.extent_m = cfg.bev_extent_m;
    bev_cfg.cam_height_m = cfg.bev_cam_height_m;
    s.bev = image_to_chw(panorama_to_bev(street, bev_cfg));
    // seed 0: the trace's spectra and mask do not depend on the draw seed
    CfeTrace trace = cfe_spectra(street_in, cfg.cam, 0);
    s.street_spectrum = std::move(trace.input_spectrum);
    s.cam_mask = std::move(trace.mask);
    return s;
}

Tensor<float> make_query_star(const TrainSample& s, const ModelConfig& cfg, uint64_t seed) {
    const int h = s.street_spectrum.h, w = s.street_spectrum.w;
    Tensor<float> out({s.street_spectrum.channels, h, w});
    std::vector<float> plane(static_cast<size_t>(h) * w);
    for (int ch = 0; ch < s.street_spectrum.channels; ++ch) {
        const Tensor<float> mixed =
            cfe_mix_plane(s.street_spectrum.planes[static_cast<size_t>(ch)], s.cam_mask,
                          cfg.cam.noise_scale, seed, static_cast<uint64_t>(ch));
        idct2_plane(mixed.ptr(), plane.data(), h, w);
        for (int i = 0; i < h * w; ++i)
            out.at(static_cast<int64_t>(ch) * h * w + i) =
                std::min(1.0f, std::max(0.0f, plane[static_cast<size_t>(i)]));
    }
    return out;
}

namespace {

std::vector<TrainSample> load_samples(const std::vector<DatasetEntry>& entries,
                                      const ModelConfig& cfg) {
    std::vector<TrainSample> out;
    out.reserve(entries.size());
    for (const auto& e : entries)
        out.push_back(prepare_sample(read_png(e.street_png), read_png(e.aerial_png), cfg));
    return out;
}

struct EmbedRows {
    std::vector<FVar> f, s_raw, b, aerial, s_star;
};

Tensor<float> rows_to_matrix(const std::vector<FVar>& rows) {
    const int n = static_cast<int>(rows.size());
    const int d = rows[0]->value.dim(1);
    Tensor<float> m({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            m.at(static_cast<int64_t>(i) * d + j) = rows[static_cast<size_t>(i)]->value.at(j);
    return m;
}

}  // namespace

DatasetEmbeddings embed_dataset(const Model& model, const std::vector<DatasetEntry>& entries) {
    std::vector<Image> streets, aerials;
    streets.reserve(entries.size());
    aerials.reserve(entries.size());
    for (const auto& e : entries) {
        streets.push_back(read_png(e.street_png));
        aerials.push_back(read_png(e.aerial_png));
    }
    DatasetEmbeddings out;
    out.queries = embed_images(model, streets, Branch::StreetFused);
    out.refs = embed_images(model, aerials, Branch::Aerial);
    return out;
}

TrainResult train_model(const std::string& data_dir, const ModelConfig& cfg,
                        const std::string& out_dir) {
    namespace fs = std::filesystem;
    cfg.validate();
    const auto entries = read_manifest(data_dir);
    if (entries.empty()) throw ValueError("train: dataset is empty");
    fs::create_directories(out_dir);

    TrainResult result;
    result.checkpoint_path = (fs::path(out_dir) / "model.ckpt").string();
    result.metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
    result.config_echo_path = (fs::path(out_dir) / "config.echo.cfg").string();

    {
        std::ofstream echo(result.config_echo_path);
        echo << serialize_config(model_config_to_map(cfg));
    }

    const std::vector<TrainSample> samples = load_samples(entries, cfg);
    Model model = build_model(cfg);
    auto params = model.named_params();
    AdamW<float> opt(cfg.opt);

    std::ofstream metrics(result.metrics_path, std::ios::trunc);
    if (!metrics) throw ValueError("train: cannot write metrics at " + result.metrics_path);

    const int n = static_cast<int>(samples.size());
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // deterministic per-epoch shuffle
        Rng shuffle_rng(rng_fold(cfg.seed, kShuffleTag, static_cast<uint64_t>(epoch)));
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[static_cast<size_t>(shuffle_rng.uniform_index(static_cast<uint64_t>(i + 1)))]);

        double sum_total = 0, sum_main = 0, sum_causal = 0, sum_geo = 0;
        int steps = 0;
        for (int start = 0; start + 1 < n; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - start);
            if (bsz < 2) break;
            const uint64_t step_seed =
                rng_fold(cfg.seed, kCfeTag, static_cast<uint64_t>(epoch), static_cast<uint64_t>(steps));
            const bool use_cfe =
                cfg.loss.gamma > 0 &&
                Rng(rng_fold(cfg.seed, kBernoulliTag, static_cast<uint64_t>(epoch) * 100003 +
                                                          static_cast<uint64_t>(steps)))
                        .uniform() < cfg.cfe_prob;

            EmbedRows rows;
            for (int k = 0; k < bsz; ++k) {
                const int idx = order[static_cast<size_t>(start + k)];
                const TrainSample& smp = samples[static_cast<size_t>(idx)];
                auto feats_s = model.encode(EncoderKind::Street, smp.street);
                auto feats_b = model.encode(EncoderKind::Bev, smp.bev);
                auto fused = model.fuse(feats_s, feats_b);
                rows.f.push_back(model.head(fused));
                rows.s_raw.push_back(model.head(feats_s));
                rows.b.push_back(model.head(feats_b));
                rows.aerial.push_back(model.head(model.encode(EncoderKind::Aerial, smp.aerial)));
                if (use_cfe) {
                    const Tensor<float> qstar = make_query_star(
                        smp, cfg, rng_fold(step_seed, static_cast<uint64_t>(idx)));
                    rows.s_star.push_back(model.head(model.encode(EncoderKind::Street, qstar)));
                }
            }
            auto f = ad::concat(rows.f, 0);
            auto S = ad::concat(rows.aerial, 0);
            auto s_raw = ad::concat(rows.s_raw, 0);
            auto b = ad::concat(rows.b, 0);
            FVar s_star;
            if (use_cfe) s_star = ad::concat(rows.s_star, 0);

            auto loss = clgt_loss(f, S, s_star, s_raw, b, cfg.loss);
            const double total = loss.total->value.at(0);
            if (!std::isfinite(total))
                throw ValueError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " step " + std::to_string(steps) + " (main=" +
                                 std::to_string(loss.main) + ", causal=" + std::to_string(loss.causal) +
                                 ", geo=" + std::to_string(loss.geo) + ")");
            zero_grads(params);
            ad::backward(loss.total);
            opt.step(params);
            // keep the GeM exponent valid
            if (model.pool.p->value.at(0) < 1.0f) model.pool.p->value.at(0) = 1.0f;

            sum_total += total;
            sum_main += loss.main;
            sum_causal += loss.causal;
            sum_geo += loss.geo;
            ++steps;
            ++model.trained_steps;
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.loss_total = sum_total / std::max(1, steps);
        em.loss_main = sum_main / std::max(1, steps);
        em.loss_causal = sum_causal / std::max(1, steps);
        em.loss_geo = sum_geo / std::max(1, steps);

        {  // train recall on cached tensors
            ad::NoGradGuard ng;
            Tensor<float> q({n, cfg.embed_dim}), r({n, cfg.embed_dim});
            for (int i = 0; i < n; ++i) {
                const TrainSample& smp = samples[static_cast<size_t>(i)];
                auto fused = model.fuse(model.encode(EncoderKind::Street, smp.street),
                                        model.encode(EncoderKind::Bev, smp.bev));
                auto qrow = model.head(fused);
                auto rrow = model.head(model.encode(EncoderKind::Aerial, smp.aerial));
                for (int j = 0; j < cfg.embed_dim; ++j) {
                    q.at(static_cast<int64_t>(i) * cfg.embed_dim + j) = qrow->value.at(j);
                    r.at(static_cast<int64_t>(i) * cfg.embed_dim + j) = rrow->value.at(j);
                }
            }
            em.train_r1 = recall_at_k(q, r, 1);
        }

        nlohmann::json rec{{"epoch", em.epoch},
                           {"loss_total", em.loss_total},
                           {"loss_main", em.loss_main},
                           {"loss_causal", em.loss_causal},
                           {"loss_geo", em.loss_geo},
                           {"train_R@1", em.train_r1}};
        metrics << rec.dump() << "\n";
        metrics.flush();
        result.history.push_back(em);
        save_model(result.checkpoint_path, model);
    }
    if (cfg.epochs == 0) save_model(result.checkpoint_path, model);
    return result;
}

}  // namespace clgt
