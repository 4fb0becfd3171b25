// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// clgt <subcommand>: transform images, project panoramas, generate paired
// synthetic scenes, train, evaluate retrieval, and run verification suites.
// Exit codes: 0 success, 1 usage error, 2 data/validation error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "clgt/checkpoint.hpp"
#include "clgt/gradsuites.hpp"
#include "clgt/scenes.hpp"
#include "clgt/threading.hpp"
#include "clgt/train.hpp"

namespace {

using namespace clgt;

int cmd_cfe_apply(const std::string& in, const std::string& out, uint64_t seed, CamConfig cam) {
    const Image img = read_png(in);
    write_png(out, cfe_apply(img, cam, seed));
    std::printf("cfe apply: %s -> %s (seed %llu, radii %.3f/%.3f/%.3f)\n", in.c_str(), out.c_str(),
                static_cast<unsigned long long>(seed), cam.r_init[0], cam.r_init[1], cam.r_init[2]);
    return 0;
}

int cmd_bev_project(const std::string& in, const std::string& out, BevConfig cfg) {
    const Image pano = read_png(in);
    write_png(out, panorama_to_bev(pano, cfg));
    std::printf("bev project: %s -> %s (grid %d, extent %.1f m, height %.1f m)\n", in.c_str(),
                out.c_str(), cfg.grid_n, cfg.extent_m, cfg.cam_height_m);
    return 0;
}

int cmd_synth(const std::string& out, int count, uint64_t seed) {
    generate_dataset(out, count, seed);
    std::printf("synth generate: wrote %d pairs + manifest to %s (seed %llu)\n", count,
                out.c_str(), static_cast<unsigned long long>(seed));
    return 0;
}

ModelConfig load_model_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
    ConfigMap map;
    if (!config_path.empty()) map = read_config_file(config_path);
    for (const auto& o : overrides) apply_override(map, o);
    return model_config_from_map(map);
}

int cmd_train(const std::string& data, const std::string& config_path,
              const std::vector<std::string>& overrides, const std::string& out) {
    const ModelConfig cfg = load_model_config(config_path, overrides);
    std::printf("effective config:\n%s", serialize_config(model_config_to_map(cfg)).c_str());
    const TrainResult res = train_model(data, cfg, out);
    if (!res.history.empty()) {
        const auto& last = res.history.back();
        std::printf("final epoch %d: loss %.4f (main %.4f causal %.4f geo %.4f) train R@1 %.2f%%\n",
                    last.epoch, last.loss_total, last.loss_main, last.loss_causal, last.loss_geo,
                    last.train_r1);
    }
    std::printf("checkpoint: %s\nmetrics: %s\nconfig echo: %s\n", res.checkpoint_path.c_str(),
                res.metrics_path.c_str(), res.config_echo_path.c_str());
    return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt, const std::string& corrupt_kind,
             int severity, const std::string& k_list, uint64_t seed) {
    const Model model = load_model(ckpt);
    const auto entries = read_manifest(data);
    if (entries.empty()) throw ValueError("eval: dataset is empty");

    std::vector<Image> aerials;
    for (const auto& e : entries) aerials.push_back(read_png(e.aerial_png));
    const Tensor<float> refs = embed_images(model, aerials, Branch::Aerial);
    aerials.clear();

    std::vector<Image> queries;
    for (const auto& e : entries) {
        Image street = read_png(e.street_png);
        if (!corrupt_kind.empty() && corrupt_kind != "all") {
            street = corrupt(street, corruption_from_string(corrupt_kind), severity,
                             rng_fold(seed, static_cast<uint64_t>(e.id)));
        }
        queries.push_back(std::move(street));
    }

    Tensor<float> q;
    if (corrupt_kind == "all") {
        // every query corrupted once per kind, recall pooled over the blocks
        std::vector<Image> pooled;
        for (size_t ci = 0; ci < kAllCorruptions.size(); ++ci)
            for (size_t i = 0; i < queries.size(); ++i)
                pooled.push_back(corrupt(queries[i], kAllCorruptions[ci], severity,
                                         rng_fold(seed, ci, static_cast<uint64_t>(i))));
        q = embed_images(model, pooled, Branch::StreetFused);
        double hits = 0;
        for (int blk = 0; blk < 5; ++blk) {
            Tensor<float> qb({refs.dim(0), refs.dim(1)});
            std::copy(q.data.begin() + static_cast<int64_t>(blk) * refs.numel(),
                      q.data.begin() + static_cast<int64_t>(blk + 1) * refs.numel(),
                      qb.data.begin());
            hits += recall_at_k(qb, refs, 1) * refs.dim(0);
        }
        std::printf("pooled corrupted R@1 (severity %d, 5 kinds): %.2f%%\n", severity,
                    hits / (5 * refs.dim(0)));
        return 0;
    }
    q = embed_images(model, queries, Branch::StreetFused);

    std::vector<int> ks;
    std::stringstream ss(k_list);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) ks.push_back(std::stoi(tok));
    std::string header, values;
    for (int k : ks) {
        header += "R@" + std::to_string(k) + "\t";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f\t", recall_at_k(q, refs, k));
        values += buf;
    }
    header += "R@1%";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", recall_at_percent(q, refs, 1.0));
    values += buf;
    std::printf("%s\n%s\n", header.c_str(), values.c_str());
    return 0;
}

int cmd_gradcheck(const std::string& module) {
    const auto results = run_grad_suites(module);
    std::map<std::string, double> per_module;
    for (const auto& r : results) {
        per_module[r.module] = std::max(per_module[r.module], r.max_err);
        std::printf("  %-12s %-24s max rel err %.3e\n", r.module.c_str(), r.name.c_str(),
                    r.max_err);
    }
    bool ok = true;
    for (const auto& [mod, err] : per_module) {
        std::printf("%-12s max rel err %.3e %s\n", mod.c_str(), err, err < 1e-4 ? "OK" : "FAIL");
        ok = ok && err < 1e-4;
    }
    return ok ? 0 : 2;
}

int cmd_stats(const std::string& ckpt) {
    const Model model = load_model(ckpt);
    const ModelStats stats = model_stats(model);
    std::printf("%-28s %12s %14s\n", "layer", "params", "MACs");
    for (const auto& l : stats.layers)
        std::printf("%-28s %12lld %14lld\n", l.name.c_str(), static_cast<long long>(l.params),
                    static_cast<long long>(l.macs));
    std::printf("%-28s %12lld %14lld\n", "TOTAL", static_cast<long long>(stats.total_params),
                static_cast<long long>(stats.total_macs));
    // cross-check against the actual tensors
    int64_t actual = 0;
    for (const auto& [name, p] : model.named_params()) actual += p->value.numel();
    std::printf("parameter tensors hold %lld values\n", static_cast<long long>(actual));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    clgt::init_threads_from_env();
    CLI::App app{"clgt: cross-view geo-localization toolkit"};
    app.require_subcommand(1);

    // cfe apply
    auto* cfe_cmd = app.add_subcommand("cfe", "frequency-domain causal feature extraction");
    auto* cfe_apply_cmd = cfe_cmd->add_subcommand("apply", "apply the band randomization to a PNG");
    std::string cfe_in, cfe_out;
    uint64_t cfe_seed = 0;
    clgt::CamConfig cam;
    cfe_apply_cmd->add_option("--in", cfe_in, "input PNG")->required();
    cfe_apply_cmd->add_option("--out", cfe_out, "output PNG")->required();
    cfe_apply_cmd->add_option("--seed", cfe_seed, "noise seed")->required();
    cfe_apply_cmd->add_option("--r1", cam.r_init[0], "inner radius");
    cfe_apply_cmd->add_option("--r2", cam.r_init[1], "causal band outer radius");
    cfe_apply_cmd->add_option("--r3", cam.r_init[2], "mid-high outer radius");
    cfe_apply_cmd->add_option("--kappa", cam.kappa, "radius adaptation gain");

    // bev project
    auto* bev_cmd = app.add_subcommand("bev", "panorama / ground-plane geometry");
    auto* bev_project_cmd = bev_cmd->add_subcommand("project", "project a panorama to BEV");
    std::string bev_in, bev_out;
    clgt::BevConfig bev_cfg;
    bev_project_cmd->add_option("--in", bev_in, "input panorama PNG")->required();
    bev_project_cmd->add_option("--out", bev_out, "output BEV PNG")->required();
    bev_project_cmd->add_option("--grid", bev_cfg.grid_n, "BEV grid side");
    bev_project_cmd->add_option("--extent", bev_cfg.extent_m, "half extent in meters");
    bev_project_cmd->add_option("--height", bev_cfg.cam_height_m, "camera height in meters");

    // synth generate
    auto* synth_cmd = app.add_subcommand("synth", "synthetic paired scenes");
    auto* synth_gen_cmd = synth_cmd->add_subcommand("generate", "write a paired dataset");
    std::string synth_out;
    int synth_count = 0;
    uint64_t synth_seed = 0;
    synth_gen_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_gen_cmd->add_option("--count", synth_count, "number of pairs")->required();
    synth_gen_cmd->add_option("--seed", synth_seed, "dataset seed")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train the retrieval model");
    std::string train_data, train_config, train_out;
    std::vector<std::string> train_overrides;
    train_cmd->add_option("--data", train_data, "dataset directory")->required();
    train_cmd->add_option("--config", train_config, "dotted-key config file");
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--set", train_overrides, "config override key=value");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate retrieval recall");
    std::string eval_data, eval_ckpt, eval_corrupt, eval_k = "1,5,10";
    int eval_severity = 3;
    uint64_t eval_seed = 7;
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--corrupt", eval_corrupt,
                         "corrupt queries: gaussian_noise|brightness|fog|snow|motion_blur|all");
    eval_cmd->add_option("--severity", eval_severity, "corruption severity 1..5");
    eval_cmd->add_option("--k", eval_k, "comma-separated recall cutoffs");
    eval_cmd->add_option("--seed", eval_seed, "corruption seed");

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suites");
    std::string grad_module;
    grad_cmd->add_option("--module", grad_module, "restrict to one module");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "parameter / MAC accounting");
    std::string stats_ckpt;
    stats_cmd->add_option("--ckpt", stats_ckpt, "checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (cfe_apply_cmd->parsed()) return cmd_cfe_apply(cfe_in, cfe_out, cfe_seed, cam);
        if (bev_project_cmd->parsed()) return cmd_bev_project(bev_in, bev_out, bev_cfg);
        if (synth_gen_cmd->parsed()) return cmd_synth(synth_out, synth_count, synth_seed);
        if (train_cmd->parsed()) return cmd_train(train_data, train_config, train_overrides, train_out);
        if (eval_cmd->parsed())
            return cmd_eval(eval_data, eval_ckpt, eval_corrupt, eval_severity, eval_k, eval_seed);
        if (grad_cmd->parsed()) return cmd_gradcheck(grad_module);
        if (stats_cmd->parsed()) return cmd_stats(stats_ckpt);
        std::fprintf(stderr, "no subcommand given\n%s\n", app.help().c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
