// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CLGT_TRAIN_HPP
#define CLGT_TRAIN_HPP

#include <string>
#include <vector>

#include "clgt/checkpoint.hpp"
#include "clgt/model.hpp"
#include "clgt/scenes.hpp"

namespace clgt {

struct EpochMetrics {
    int epoch = 0;
    double loss_total = 0, loss_main = 0, loss_causal = 0, loss_geo = 0;
    double train_r1 = 0;
};

struct TrainResult {
    std::string checkpoint_path;
    std::string metrics_path;
    std::string config_echo_path;
    std::vector<EpochMetrics> history;
};

// Preprocessed training views of one dataset pair: resized CHW tensors plus
// the cached DCT spectra / region mask that make the per-step intervention a
// mix + inverse transform.
struct TrainSample {
    Tensor<float> street, aerial, bev;
    Spectrum street_spectrum;
    RegionMask cam_mask;
};

TrainSample prepare_sample(const Image& street, const Image& aerial, const ModelConfig& cfg);

// The intervened street input Query*: cached spectra remixed with the given
// seed, inverse-transformed, clamped. Equals cfe_apply on the resized input.
Tensor<float> make_query_star(const TrainSample& s, const ModelConfig& cfg, uint64_t seed);

TrainResult train_model(const std::string& data_dir, const ModelConfig& cfg,
                        const std::string& out_dir);

// Embeds every dataset pair with the model (fused street queries, aerial
// references); used for epoch metrics and evaluation.
struct DatasetEmbeddings {
    Tensor<float> queries, refs;
};

DatasetEmbeddings embed_dataset(const Model& model, const std::vector<DatasetEntry>& entries);

}  // namespace clgt

#endif
