// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// The toy retrieval model: three small conv encoders (street / aerial /
// BEV, the BEV one sharing street weights by default), one GT Fusion block
// on the query side, data-adaptive pooling, and a shared linear projection
// to the embedding space. Inputs are resized to a square input_hw before
// encoding (the BEV is projected from the full-resolution panorama first).

#ifndef CLGT_MODEL_HPP
#define CLGT_MODEL_HPP

#include "clgt/bev.hpp"
#include "clgt/cfe.hpp"
#include "clgt/configfile.hpp"
#include "clgt/fusion.hpp"
#include "clgt/image.hpp"
#include "clgt/loss.hpp"
#include "clgt/optim.hpp"
#include "clgt/pooling.hpp"

namespace clgt {

using FVar = ad::Var<float>;

struct ModelConfig {
    std::vector<int> widths{16, 32, 32};  // encoder stage widths, stride 2 each
    int embed_dim = 64;
    int heads = 4;
    int fusion_hw = 8;   // feature map entering fusion
    int input_hw = 64;   // model input resolution (square)
    bool share_bev_encoder = true;
    std::string pooling = "da";
    double gem_p_init = 3.0;

    CamConfig cam;
    LossConfig loss;
    double bev_extent_m = 20.0;
    double bev_cam_height_m = 2.0;

    int epochs = 200;
    int batch_size = 32;
    uint64_t seed = 1;
    double cfe_prob = 1.0;
    AdamWConfig opt;

    void validate() const;
    int fusion_channels() const { return widths.back(); }
};

ModelConfig model_config_from_map(const ConfigMap& map);
ConfigMap model_config_to_map(const ModelConfig& cfg);

struct ConvStage {
    FVar w, b, ln_g, ln_b;
};

enum class EncoderKind { Street, Aerial, Bev };
enum class Branch { StreetFused, Aerial, StreetRaw, Bev };

Branch branch_from_string(const std::string& s);

class Model {
public:
    ModelConfig cfg;
    FusionConfig fusion_cfg;
    std::vector<ConvStage> enc_street, enc_aerial, enc_bev;  // enc_bev empty when shared
    FusionParams<float> fusion;
    DaPoolParams<float> pool;
    FVar proj_w, proj_b;
    int64_t trained_steps = 0;

    // Unique named parameters (shared encoders appear once).
    std::vector<std::pair<std::string, FVar>> named_params() const;

    const std::vector<ConvStage>& encoder(EncoderKind k) const;

    // Graph builders.
    FVar encode(EncoderKind k, const Tensor<float>& chw) const;
    FVar encode(EncoderKind k, const FVar& chw) const;
    FVar fuse(const FVar& street_feats, const FVar& bev_feats) const;
    FVar head(const FVar& feats) const;  // pool -> proj -> L2, (1,D)

    BevConfig bev_config() const;
};

Model build_model(const ModelConfig& cfg);

// HWC image [0,1] -> CHW float tensor.
Tensor<float> image_to_chw(const Image& img);

// Street panoramas feed StreetFused / StreetRaw / Bev branches (the BEV is
// projected internally); aerial images feed the Aerial branch. Rows come
// back unit-norm. Runs without recording gradients.
Tensor<float> embed_images(const Model& model, const std::vector<Image>& images, Branch branch);

// Fraction (percent) of queries whose diagonal reference ranks in the top
// k by dot product; ties break toward the lower reference index.
double recall_at_k(const Tensor<float>& queries, const Tensor<float>& refs, int k);
double recall_at_percent(const Tensor<float>& queries, const Tensor<float>& refs,
                         double percent = 1.0);

struct LayerStat {
    std::string name;
    int64_t params = 0;
    int64_t macs = 0;
};

struct ModelStats {
    std::vector<LayerStat> layers;
    int64_t total_params = 0;
    int64_t total_macs = 0;
};

ModelStats accumulate_stats(const std::vector<LayerStat>& layers);

// Analytic per-layer parameter / multiply-accumulate accounting for one
// query (street + BEV + fusion) and one reference (aerial) forward pass.
ModelStats model_stats(const Model& model);

}  // namespace clgt

#endif
