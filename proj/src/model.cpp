// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace clgt {

void ModelConfig::validate() const {
    if (widths.empty()) throw ValueError("ModelConfig: need at least one encoder stage");
    for (int w : widths)
        if (w <= 0) throw ValueError("ModelConfig: nonpositive stage width");
    if (embed_dim <= 0) throw ValueError("ModelConfig: embed_dim must be > 0");
    if (fusion_channels() % heads != 0)
        throw ValueError("ModelConfig: width at fusion (" + std::to_string(fusion_channels()) +
                         ") must be divisible by heads (" + std::to_string(heads) + ")");
    if (batch_size < 2) throw ValueError("ModelConfig: batch size must be >= 2");
    const int stages = static_cast<int>(widths.size());
    if (input_hw != fusion_hw << stages)
        throw ValueError("ModelConfig: input_hw (" + std::to_string(input_hw) +
                         ") must equal fusion_hw * 2^stages (" +
                         std::to_string(fusion_hw << stages) + ")");
    if (cfe_prob < 0 || cfe_prob > 1) throw ValueError("ModelConfig: cfe_prob must lie in [0,1]");
    if (epochs < 0) throw ValueError("ModelConfig: epochs must be >= 0");
    pool_mode_from_string(pooling);
    cam.validate();
    loss.validate();
}

namespace {

template <typename Fn>
void with_key(const ConfigMap& m, const std::string& key, Fn fn) {
    auto it = m.find(key);
    if (it != m.end()) fn(it->second);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValueError("config key " + key + ": expected number, got '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    return static_cast<int>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValueError("config key " + key + ": expected bool, got '" + v + "'");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

ModelConfig model_config_from_map(const ConfigMap& m) {
    ModelConfig c;
    with_key(m, "model.widths", [&](const std::string& v) {
        c.widths.clear();
        std::stringstream ss(v);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) c.widths.push_back(to_int("model.widths", tok));
    });
    with_key(m, "model.embed_dim", [&](const std::string& v) { c.embed_dim = to_int("model.embed_dim", v); });
    with_key(m, "model.heads", [&](const std::string& v) { c.heads = to_int("model.heads", v); });
    with_key(m, "model.fusion_hw", [&](const std::string& v) { c.fusion_hw = to_int("model.fusion_hw", v); });
    with_key(m, "model.input_hw", [&](const std::string& v) { c.input_hw = to_int("model.input_hw", v); });
    with_key(m, "model.share_bev_encoder",
             [&](const std::string& v) { c.share_bev_encoder = to_bool("model.share_bev_encoder", v); });
    with_key(m, "model.pooling", [&](const std::string& v) { c.pooling = v; });
    with_key(m, "model.gem_p_init", [&](const std::string& v) { c.gem_p_init = to_double("model.gem_p_init", v); });
    with_key(m, "cam.r1", [&](const std::string& v) { c.cam.r_init[0] = to_double("cam.r1", v); });
    with_key(m, "cam.r2", [&](const std::string& v) { c.cam.r_init[1] = to_double("cam.r2", v); });
    with_key(m, "cam.r3", [&](const std::string& v) { c.cam.r_init[2] = to_double("cam.r3", v); });
    with_key(m, "cam.kappa", [&](const std::string& v) { c.cam.kappa = to_double("cam.kappa", v); });
    with_key(m, "cam.grad_norm_c", [&](const std::string& v) { c.cam.grad_norm_c = to_double("cam.grad_norm_c", v); });
    with_key(m, "cam.lambda_low", [&](const std::string& v) { c.cam.noise_scale[0] = to_double("cam.lambda_low", v); });
    with_key(m, "cam.lambda_midhigh",
             [&](const std::string& v) { c.cam.noise_scale[1] = to_double("cam.lambda_midhigh", v); });
    with_key(m, "cam.lambda_high", [&](const std::string& v) { c.cam.noise_scale[2] = to_double("cam.lambda_high", v); });
    with_key(m, "cam.r_max", [&](const std::string& v) { c.cam.r_max = to_double("cam.r_max", v); });
    with_key(m, "loss.tau", [&](const std::string& v) { c.loss.tau = to_double("loss.tau", v); });
    with_key(m, "loss.alpha", [&](const std::string& v) { c.loss.alpha = to_double("loss.alpha", v); });
    with_key(m, "loss.gamma", [&](const std::string& v) { c.loss.gamma = to_double("loss.gamma", v); });
    with_key(m, "loss.symmetric", [&](const std::string& v) { c.loss.symmetric = to_bool("loss.symmetric", v); });
    with_key(m, "bev.extent_m", [&](const std::string& v) { c.bev_extent_m = to_double("bev.extent_m", v); });
    with_key(m, "bev.cam_height_m",
             [&](const std::string& v) { c.bev_cam_height_m = to_double("bev.cam_height_m", v); });
    with_key(m, "train.epochs", [&](const std::string& v) { c.epochs = to_int("train.epochs", v); });
    with_key(m, "train.batch_size", [&](const std::string& v) { c.batch_size = to_int("train.batch_size", v); });
    with_key(m, "train.seed", [&](const std::string& v) {
        c.seed = static_cast<uint64_t>(std::stoull(v));
    });
    with_key(m, "train.cfe_prob", [&](const std::string& v) { c.cfe_prob = to_double("train.cfe_prob", v); });
    with_key(m, "opt.lr", [&](const std::string& v) { c.opt.lr = to_double("opt.lr", v); });
    with_key(m, "opt.beta1", [&](const std::string& v) { c.opt.beta1 = to_double("opt.beta1", v); });
    with_key(m, "opt.beta2", [&](const std::string& v) { c.opt.beta2 = to_double("opt.beta2", v); });
    with_key(m, "opt.eps", [&](const std::string& v) { c.opt.eps = to_double("opt.eps", v); });
    with_key(m, "opt.weight_decay", [&](const std::string& v) { c.opt.weight_decay = to_double("opt.weight_decay", v); });
    c.validate();
    return c;
}

ConfigMap model_config_to_map(const ModelConfig& c) {
    ConfigMap m;
    std::string widths;
    for (size_t i = 0; i < c.widths.size(); ++i)
        widths += (i ? "," : "") + std::to_string(c.widths[i]);
    m["model.widths"] = widths;
    m["model.embed_dim"] = std::to_string(c.embed_dim);
    m["model.heads"] = std::to_string(c.heads);
    m["model.fusion_hw"] = std::to_string(c.fusion_hw);
    m["model.input_hw"] = std::to_string(c.input_hw);
    m["model.share_bev_encoder"] = c.share_bev_encoder ? "true" : "false";
    m["model.pooling"] = c.pooling;
    m["model.gem_p_init"] = fmt(c.gem_p_init);
    m["cam.r1"] = fmt(c.cam.r_init[0]);
    m["cam.r2"] = fmt(c.cam.r_init[1]);
    m["cam.r3"] = fmt(c.cam.r_init[2]);
    m["cam.kappa"] = fmt(c.cam.kappa);
    m["cam.grad_norm_c"] = fmt(c.cam.grad_norm_c);
    m["cam.lambda_low"] = fmt(c.cam.noise_scale[0]);
    m["cam.lambda_midhigh"] = fmt(c.cam.noise_scale[1]);
    m["cam.lambda_high"] = fmt(c.cam.noise_scale[2]);
    m["cam.r_max"] = fmt(c.cam.r_max);
    m["loss.tau"] = fmt(c.loss.tau);
    m["loss.alpha"] = fmt(c.loss.alpha);
    m["loss.gamma"] = fmt(c.loss.gamma);
    m["loss.symmetric"] = c.loss.symmetric ? "true" : "false";
    m["bev.extent_m"] = fmt(c.bev_extent_m);
    m["bev.cam_height_m"] = fmt(c.bev_cam_height_m);
    m["train.epochs"] = std::to_string(c.epochs);
    m["train.batch_size"] = std::to_string(c.batch_size);
    m["train.seed"] = std::to_string(c.seed);
    m["train.cfe_prob"] = fmt(c.cfe_prob);
    m["opt.lr"] = fmt(c.opt.lr);
    m["opt.beta1"] = fmt(c.opt.beta1);
    m["opt.beta2"] = fmt(c.opt.beta2);
    m["opt.eps"] = fmt(c.opt.eps);
    m["opt.weight_decay"] = fmt(c.opt.weight_decay);
    return m;
}

Branch branch_from_string(const std::string& s) {
    if (s == "street-fused") return Branch::StreetFused;
    if (s == "aerial") return Branch::Aerial;
    if (s == "street-raw") return Branch::StreetRaw;
    if (s == "bev") return Branch::Bev;
    throw ValueError("unknown embed branch: " + s);
}

namespace {

std::vector<ConvStage> init_encoder(const ModelConfig& cfg, uint64_t seed,
                                    const std::string& name) {
    std::vector<ConvStage> stages;
    int cin = 3;
    for (size_t i = 0; i < cfg.widths.size(); ++i) {
        const int cout = cfg.widths[i];
        Rng rng(rng_fold(seed, i));
        ConvStage st;
        const double stddev = std::sqrt(2.0 / (cin * 9.0));  // He init for 3x3 conv
        st.w = ad::param(Tensor<float>::randn({cout, cin, 3, 3}, rng, static_cast<float>(stddev)),
                         name + ".s" + std::to_string(i) + ".w");
        st.b = ad::param(Tensor<float>({cout}), name + ".s" + std::to_string(i) + ".b");
        st.ln_g = ad::param(Tensor<float>::full({cout}, 1.0f), name + ".s" + std::to_string(i) + ".ln_g");
        st.ln_b = ad::param(Tensor<float>({cout}), name + ".s" + std::to_string(i) + ".ln_b");
        stages.push_back(std::move(st));
        cin = cout;
    }
    return stages;
}

}  // namespace

Model build_model(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.fusion_cfg.channels = cfg.fusion_channels();
    m.fusion_cfg.heads = cfg.heads;
    m.fusion_cfg.h = cfg.fusion_hw;
    m.fusion_cfg.w = cfg.fusion_hw;
    m.enc_street = init_encoder(cfg, rng_fold(cfg.seed, 1), "enc_street");
    m.enc_aerial = init_encoder(cfg, rng_fold(cfg.seed, 2), "enc_aerial");
    if (!cfg.share_bev_encoder) m.enc_bev = init_encoder(cfg, rng_fold(cfg.seed, 3), "enc_bev");
    m.fusion = init_fusion_params<float>(m.fusion_cfg, rng_fold(cfg.seed, 4));
    m.pool = init_da_pool_params<float>(cfg.fusion_channels(), cfg.gem_p_init);
    Rng rng(rng_fold(cfg.seed, 5));
    const double stddev = std::sqrt(1.0 / cfg.fusion_channels());
    m.proj_w = ad::param(Tensor<float>::randn({cfg.fusion_channels(), cfg.embed_dim}, rng,
                                              static_cast<float>(stddev)),
                         "proj.w");
    m.proj_b = ad::param(Tensor<float>({cfg.embed_dim}), "proj.b");
    return m;
}

std::vector<std::pair<std::string, FVar>> Model::named_params() const {
    std::vector<std::pair<std::string, FVar>> out;
    auto add_encoder = [&](const std::vector<ConvStage>& enc) {
        for (const auto& st : enc) {
            out.emplace_back(st.w->name, st.w);
            out.emplace_back(st.b->name, st.b);
            out.emplace_back(st.ln_g->name, st.ln_g);
            out.emplace_back(st.ln_b->name, st.ln_b);
        }
    };
    add_encoder(enc_street);
    add_encoder(enc_aerial);
    if (!enc_bev.empty()) add_encoder(enc_bev);
    for (auto& [name, v] : fusion.named("fusion.")) out.emplace_back(name, v);
    for (auto& [name, v] : pool.named("pool.")) out.emplace_back(name, v);
    out.emplace_back("proj.w", proj_w);
    out.emplace_back("proj.b", proj_b);
    return out;
}

const std::vector<ConvStage>& Model::encoder(EncoderKind k) const {
    switch (k) {
        case EncoderKind::Street: return enc_street;
        case EncoderKind::Aerial: return enc_aerial;
        case EncoderKind::Bev: return enc_bev.empty() ? enc_street : enc_bev;
    }
    throw ValueError("encoder: bad kind");
}

FVar Model::encode(EncoderKind k, const FVar& input) const {
    FVar x = input;
    for (const auto& st : encoder(k)) {
        x = ad::conv2d(x, st.w, st.b, 2, 1);
        x = ad::layer_norm(x, st.ln_g, st.ln_b, 0);  // over channels per position
        x = ad::gelu(x);
    }
    return x;
}

FVar Model::encode(EncoderKind k, const Tensor<float>& chw) const {
    return encode(k, ad::constant(chw));
}

FVar Model::fuse(const FVar& street_feats, const FVar& bev_feats) const {
    return gt_fusion_forward(street_feats, bev_feats, fusion, fusion_cfg);
}

FVar Model::head(const FVar& feats) const {
    auto pooled = pool_features(feats, pool, pool_mode_from_string(cfg.pooling));
    auto proj = ad::linear(ad::as_row(pooled), proj_w, proj_b);
    return ad::l2_normalize_rows(proj);  // (1,D)
}

BevConfig Model::bev_config() const {
    BevConfig b;
    b.grid_n = cfg.input_hw;
    b.extent_m = cfg.bev_extent_m;
    b.cam_height_m = cfg.bev_cam_height_m;
    return b;
}

Tensor<float> image_to_chw(const Image& img) {
    Tensor<float> t({img.c, img.h, img.w});
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                t.at((static_cast<int64_t>(ch) * img.h + y) * img.w + x) = img.at(y, x, ch);
    return t;
}

Tensor<float> embed_images(const Model& model, const std::vector<Image>& images, Branch branch) {
    ad::NoGradGuard ng;
    const int n = static_cast<int>(images.size());
    if (n == 0) throw ValueError("embed_images: empty batch");
    Tensor<float> out({n, model.cfg.embed_dim});
    const int s = model.cfg.input_hw;
    for (int i = 0; i < n; ++i) {
        const Image& img = images[static_cast<size_t>(i)];
        FVar row;
        switch (branch) {
            case Branch::Aerial:
                row = model.head(model.encode(EncoderKind::Aerial,
                                              image_to_chw(resize_bilinear(img, s, s))));
                break;
            case Branch::StreetRaw:
                row = model.head(model.encode(EncoderKind::Street,
                                              image_to_chw(resize_bilinear(img, s, s))));
                break;
            case Branch::Bev: {
                const Image bev = panorama_to_bev(img, model.bev_config());
                row = model.head(model.encode(EncoderKind::Bev, image_to_chw(bev)));
                break;
            }
            case Branch::StreetFused: {
                const Image bev = panorama_to_bev(img, model.bev_config());
                auto fs = model.encode(EncoderKind::Street,
                                       image_to_chw(resize_bilinear(img, s, s)));
                auto fb = model.encode(EncoderKind::Bev, image_to_chw(bev));
                row = model.head(model.fuse(fs, fb));
                break;
            }
        }
        for (int dcol = 0; dcol < model.cfg.embed_dim; ++dcol)
            out.at(static_cast<int64_t>(i) * model.cfg.embed_dim + dcol) = row->value.at(dcol);
    }
    return out;
}

double recall_at_k(const Tensor<float>& queries, const Tensor<float>& refs, int k) {
    if (queries.shape != refs.shape || queries.rank() != 2)
        throw_shape_mismatch("recall_at_k", queries.shape, refs.shape);
    if (k < 1) throw ValueError("recall_at_k: k must be >= 1");
    const int n = queries.dim(0), d = queries.dim(1);
    int hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
    for (int i = 0; i < n; ++i) {
        double pos = 0;
        for (int c = 0; c < d; ++c)
            pos += double(queries.at(static_cast<int64_t>(i) * d + c)) *
                   double(refs.at(static_cast<int64_t>(i) * d + c));
        int rank = 1;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double sim = 0;
            for (int c = 0; c < d; ++c)
                sim += double(queries.at(static_cast<int64_t>(i) * d + c)) *
                       double(refs.at(static_cast<int64_t>(j) * d + c));
            if (sim > pos || (sim == pos && j < i)) ++rank;
        }
        if (rank <= k) ++hits;
    }
    return 100.0 * hits / n;
}

double recall_at_percent(const Tensor<float>& queries, const Tensor<float>& refs, double percent) {
    const int n = queries.dim(0);
    const int k = static_cast<int>(std::ceil(n * percent / 100.0));
    return recall_at_k(queries, refs, std::max(1, k));
}

ModelStats accumulate_stats(const std::vector<LayerStat>& layers) {
    ModelStats s;
    s.layers = layers;
    for (const auto& l : layers) {
        s.total_params += l.params;
        s.total_macs += l.macs;
    }
    return s;
}

namespace {

LayerStat conv_stat(const std::string& name, int cin, int cout, int k, int ho, int wo) {
    return {name, static_cast<int64_t>(cout) * (static_cast<int64_t>(cin) * k * k + 1),
            static_cast<int64_t>(cin) * k * k * cout * ho * wo};
}

LayerStat dw_conv_stat(const std::string& name, int c, int k, int ho, int wo) {
    return {name, static_cast<int64_t>(c) * (k * k + 1),
            static_cast<int64_t>(c) * k * k * ho * wo};
}

LayerStat linear_stat(const std::string& name, int cin, int cout, int64_t applications) {
    return {name, static_cast<int64_t>(cin) * cout + cout,
            static_cast<int64_t>(cin) * cout * applications};
}

}  // namespace

ModelStats model_stats(const Model& model) {
    const ModelConfig& cfg = model.cfg;
    std::vector<LayerStat> layers;
    auto encoder_stats = [&](const std::string& name) {
        int cin = 3, hw = cfg.input_hw;
        for (size_t i = 0; i < cfg.widths.size(); ++i) {
            hw /= 2;
            const int cout = cfg.widths[i];
            layers.push_back(conv_stat(name + ".s" + std::to_string(i) + ".conv", cin, cout, 3, hw, hw));
            layers.push_back({name + ".s" + std::to_string(i) + ".ln", 2 * cout, 0});
            cin = cout;
        }
    };
    encoder_stats("enc_street");
    encoder_stats("enc_aerial");
    if (!cfg.share_bev_encoder)
        encoder_stats("enc_bev");
    else
        layers.push_back({"enc_bev(shared fwd)", 0,
                          [&] {
                              int cin = 3, hw = cfg.input_hw;
                              int64_t macs = 0;
                              for (int cout : cfg.widths) {
                                  hw /= 2;
                                  macs += static_cast<int64_t>(cin) * 9 * cout * hw * hw;
                                  cin = cout;
                              }
                              return macs;
                          }()});

    const FusionConfig& fc = model.fusion_cfg;
    const int c = fc.channels, h = fc.h, w = fc.w, rh = fc.rh(), rw = fc.rw();
    const int ntok = fc.tokens(), d = fc.head_dim();
    layers.push_back(dw_conv_stat("fusion.dw_s", c, 3, h, w));
    layers.push_back(dw_conv_stat("fusion.dw_b", c, 3, h, w));
    layers.push_back(conv_stat("fusion.osr_q", c, c, 3, rh, rw));
    layers.push_back(conv_stat("fusion.osr_kv", c, c, 3, rh, rw));
    layers.push_back({"fusion.ln_q+ln_kv", 4 * c, 0});
    for (int head = 0; head < fc.heads; ++head) {
        const std::string nm = "fusion.head" + std::to_string(head);
        layers.push_back(linear_stat(nm + ".wq", c, d, ntok));
        layers.push_back(linear_stat(nm + ".wk", c, d, ntok));
        layers.push_back(linear_stat(nm + ".wv", c, d, ntok));
        layers.push_back({nm + ".attn", fc.table_size(),
                          2LL * ntok * ntok * d});  // QK^T and attn*V
    }
    layers.push_back(linear_stat("fusion.wo", c, c, ntok));
    layers.push_back(linear_stat("fusion.ddf.gamma", c, c, 1));
    layers.push_back(conv_stat("fusion.ddf.conv_fuse", 2 * c, c, 3, h, w));
    layers.push_back(conv_stat("fusion.ddf.w_adapt", c, c, 1, 1, 1));

    const PoolMode pm = pool_mode_from_string(cfg.pooling);
    const int64_t pool_apps = 2;  // inference heads: fused query + aerial reference
    if (pm == PoolMode::Da) {
        layers.push_back(linear_stat("pool.lin", c, c, pool_apps));
        layers.push_back(linear_stat("pool.gate", c, c, pool_apps));
        layers.push_back({"pool.p", 1, 0});
    } else if (pm == PoolMode::Gem) {
        layers.push_back({"pool.p", 1, 0});
    }
    layers.push_back(linear_stat("proj", c, cfg.embed_dim, pool_apps));
    return accumulate_stats(layers);
}

}  // namespace clgt
