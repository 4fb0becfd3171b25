// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference suites for every catalog op and every composite block.
// Parameters enter as gradcheck leaves, so the same machinery validates
// input and parameter gradients.

#include "clgt/gradsuites.hpp"

#include "clgt/fusion.hpp"
#include "clgt/gradcheck.hpp"
#include "clgt/loss.hpp"
#include "clgt/pooling.hpp"

namespace clgt {

namespace {

using DVar = ad::Var<double>;
using Leaves = std::vector<DVar>;

// Scalarize with fixed pseudo-random weights so every output coordinate
// carries a distinct adjoint.
DVar weighted_sum(const DVar& x, uint64_t tag = 17) {
    Rng rng(rng_fold(tag, static_cast<uint64_t>(x->value.numel())));
    Tensor<double> w(x->value.shape);
    for (auto& v : w.data) v = rng.uniform(0.25, 1.0);
    return ad::sum_all(ad::mul(x, ad::constant(w)));
}

Tensor<double> positive_randn(const std::vector<int>& shape, Rng& rng, double floor) {
    Tensor<double> t(shape);
    for (auto& v : t.data) v = std::abs(rng.normal()) + floor;
    return t;
}

// Values pairwise separated per channel, so max-pool FD never crosses a tie.
Tensor<double> tie_free(const std::vector<int>& shape, Rng& rng) {
    Tensor<double> t(shape);
    for (int64_t i = 0; i < t.numel(); ++i)
        t.at(i) = rng.normal() + 1e-3 * static_cast<double>(i);
    return t;
}

double suite_simple(uint64_t seed, const GraphBuilder& b,
                    const std::vector<std::vector<int>>& shapes) {
    return grad_check(b, shapes, seed).max_rel_error;
}

// --------------------------- fusion plumbing -------------------------------

FusionConfig small_fusion_cfg() {
    FusionConfig cfg;
    cfg.channels = 4;
    cfg.heads = 2;
    cfg.h = 8;
    cfg.w = 8;
    return cfg;
}

std::vector<std::vector<int>> fusion_param_shapes(const FusionConfig& cfg) {
    const int c = cfg.channels, d = cfg.head_dim(), s = cfg.table_size();
    std::vector<std::vector<int>> shapes = {
        {c, 3, 3}, {c}, {c, 3, 3}, {c},              // dw_s, dw_b
        {c, c, 3, 3}, {c}, {c, c, 3, 3}, {c},        // osr_q, osr_kv
        {c}, {c}, {c}, {c},                          // ln_q, ln_kv
    };
    for (int h = 0; h < cfg.heads; ++h) {
        shapes.push_back({c, d});
        shapes.push_back({d});
        shapes.push_back({c, d});
        shapes.push_back({d});
        shapes.push_back({c, d});
        shapes.push_back({d});
        shapes.push_back({s, 1});
    }
    shapes.push_back({c, c});
    shapes.push_back({c});
    shapes.push_back({c, c});
    shapes.push_back({c});
    shapes.push_back({c, 2 * c, 3, 3});
    shapes.push_back({c});
    shapes.push_back({c, c, 1, 1});
    shapes.push_back({c});
    return shapes;
}

FusionParams<double> fusion_params_from_leaves(const FusionConfig& cfg, const Leaves& in,
                                               size_t off) {
    FusionParams<double> p;
    size_t i = off;
    p.dw_s_w = in[i++];
    p.dw_s_b = in[i++];
    p.dw_b_w = in[i++];
    p.dw_b_b = in[i++];
    p.osr_q_w = in[i++];
    p.osr_q_b = in[i++];
    p.osr_kv_w = in[i++];
    p.osr_kv_b = in[i++];
    p.ln_q_g = in[i++];
    p.ln_q_b = in[i++];
    p.ln_kv_g = in[i++];
    p.ln_kv_b = in[i++];
    for (int h = 0; h < cfg.heads; ++h) {
        p.wq.push_back(in[i++]);
        p.bq.push_back(in[i++]);
        p.wk.push_back(in[i++]);
        p.bk.push_back(in[i++]);
        p.wv.push_back(in[i++]);
        p.bv.push_back(in[i++]);
        p.bias_table.push_back(in[i++]);
    }
    p.wo_w = in[i++];
    p.wo_b = in[i++];
    p.ddf_gamma_w = in[i++];
    p.ddf_gamma_b = in[i++];
    p.ddf_conv_w = in[i++];
    p.ddf_conv_b = in[i++];
    p.ddf_adapt_w = in[i++];
    p.ddf_adapt_b = in[i++];
    return p;
}

double fusion_block_suite(uint64_t seed) {
    const FusionConfig cfg = small_fusion_cfg();
    std::vector<std::vector<int>> shapes = {{cfg.channels, cfg.h, cfg.w},
                                            {cfg.channels, cfg.h, cfg.w}};
    auto pshapes = fusion_param_shapes(cfg);
    shapes.insert(shapes.end(), pshapes.begin(), pshapes.end());
    auto builder = [cfg](const Leaves& in) {
        auto p = fusion_params_from_leaves(cfg, in, 2);
        return weighted_sum(gt_fusion_forward(in[0], in[1], p, cfg));
    };
    return grad_check(builder, shapes, seed).max_rel_error;
}

double attention_suite(uint64_t seed) {
    const FusionConfig cfg = small_fusion_cfg();
    std::vector<std::vector<int>> shapes = {{cfg.channels, cfg.h, cfg.w},
                                            {cfg.channels, cfg.h, cfg.w}};
    auto pshapes = fusion_param_shapes(cfg);
    shapes.insert(shapes.end(), pshapes.begin(), pshapes.end());
    auto builder = [cfg](const Leaves& in) {
        auto p = fusion_params_from_leaves(cfg, in, 2);
        return weighted_sum(cross_attention(in[0], in[1], p, cfg));
    };
    return grad_check(builder, shapes, seed).max_rel_error;
}

double da_pool_suite(uint64_t seed) {
    Rng rng(rng_fold(seed, 0xDA9001));
    const int c = 3;
    std::vector<Tensor<double>> inputs;
    inputs.push_back(tie_free({c, 4, 4}, rng));
    for (auto& v : inputs[0].data) v = std::abs(v) + 0.5;      // positive, away from clamp
    inputs.push_back(Tensor<double>::scalar(3.0));             // p
    inputs.push_back(Tensor<double>::randn({c, c}, rng, 0.5)); // lin.w
    inputs.push_back(Tensor<double>::randn({c}, rng, 0.1));
    inputs.push_back(Tensor<double>::randn({c, c}, rng, 0.5)); // gate.w
    inputs.push_back(Tensor<double>::randn({c}, rng, 0.1));
    auto builder = [](const Leaves& in) {
        DaPoolParams<double> p;
        p.p = in[1];
        p.lin_w = in[2];
        p.lin_b = in[3];
        p.gate_w = in[4];
        p.gate_b = in[5];
        return weighted_sum(da_pool(in[0], p));
    };
    return grad_check_inputs(builder, std::move(inputs)).max_rel_error;
}

double gem_suite(uint64_t seed) {
    Rng rng(rng_fold(seed, 0xDA9002));
    std::vector<Tensor<double>> inputs;
    inputs.push_back(positive_randn({3, 4, 4}, rng, 0.25));
    inputs.push_back(Tensor<double>::scalar(3.0));
    auto builder = [](const Leaves& in) { return weighted_sum(gem_pool(in[0], in[1])); };
    return grad_check_inputs(builder, std::move(inputs)).max_rel_error;
}

double info_nce_suite(uint64_t seed) {
    auto builder = [](const Leaves& in) {
        return info_nce(ad::l2_normalize_rows(in[0]), ad::l2_normalize_rows(in[1]), 0.1);
    };
    return suite_simple(seed, builder, {{4, 8}, {4, 8}});
}

double clgt_loss_suite(uint64_t seed) {
    LossConfig cfg;  // alpha = gamma = 0.1
    auto builder = [cfg](const Leaves& in) {
        auto out = clgt_loss(ad::l2_normalize_rows(in[0]), ad::l2_normalize_rows(in[1]),
                             ad::l2_normalize_rows(in[2]), ad::l2_normalize_rows(in[3]),
                             ad::l2_normalize_rows(in[4]), cfg);
        return out.total;
    };
    return suite_simple(seed, builder, {{4, 8}, {4, 8}, {4, 8}, {4, 8}, {4, 8}});
}

bool g_registered = false;

}  // namespace

void register_builtin_grad_suites() {
    if (g_registered) return;
    g_registered = true;
    auto& reg = GradSuiteRegistry::instance();
    auto add = [&](const char* module, const char* name, GradSuiteRegistry::SuiteFn fn) {
        reg.add(module, name, std::move(fn));
    };

    // ---- autodiff op catalog ----
    add("autodiff", "matmul", [](uint64_t s) {
        return suite_simple(s, [](const Leaves& in) { return weighted_sum(ad::matmul(in[0], in[1])); },
                            {{3, 4}, {4, 5}});
    });
    add("autodiff", "add_broadcast", [](uint64_t s) {
        return suite_simple(s, [](const Leaves& in) { return weighted_sum(ad::add(in[0], in[1])); },
                            {{3, 4, 5}, {4, 1}});
    });
    add("autodiff", "sub", [](uint64_t s) {
        return suite_simple(s, [](const Leaves& in) { return weighted_sum(ad::sub(in[0], in[1])); },
                            {{4, 4}, {4, 4}});
    });
    add("autodiff", "mul_broadcast", [](uint64_t s) {
        return suite_simple(s, [](const Leaves& in) { return weighted_sum(ad::mul(in[0], in[1])); },
                            {{3, 4, 4}, {3, 1, 1}});
    });
    add("autodiff", "div", [](uint64_t s) {
        Rng rng(rng_fold(s, 1));
        std::vector<Tensor<double>> inputs{Tensor<double>::randn({4, 4}, rng),
                                           positive_randn({4, 4}, rng, 0.5)};
        return grad_check_inputs(
                   [](const Leaves& in) { return weighted_sum(ad::div(in[0], in[1])); },
                   std::move(inputs))
            .max_rel_error;
    });
    add("autodiff", "pow", [](uint64_t s) {
        Rng rng(rng_fold(s, 2));
        std::vector<Tensor<double>> inputs{positive_randn({3, 3}, rng, 0.5),
                                           positive_randn({3, 3}, rng, 0.5)};
        return grad_check_inputs(
                   [](const Leaves& in) { return weighted_sum(ad::pow_elem(in[0], in[1])); },
                   std::move(inputs))
            .max_rel_error;
    });
    add("autodiff", "exp", [](uint64_t s) {
        return suite_simple(s, [](const Leaves& in) { return weighted_sum(ad::exp(in[0])); },
                            {{3, 5}});
    });
    add("autodiff", "log", [](uint64_t s) {
        Rng rng(rng_fold(s, 3));
        std::vector<Tensor<double>> inputs{positive_randn({3, 5}, rng, 0.5)};
        return grad_check_inputs(
                   [](const Leaves& in) { return weighted_sum(ad::log(in[0])); },
                   std::move(inputs))
            .max_rel_error;
    });
    add("autodiff", "sigmoid", [](uint64_t s) {
        return suite_simple(s, [](const Leaves& in) { return weighted_sum(ad::sigmoid(in[0])); },
                            {{3, 5}});
    });
    add("autodiff", "gelu", [](uint64_t s) {
        return suite_simple(s, [](const Leaves& in) { return weighted_sum(ad::gelu(in[0])); },
                            {{3, 5}});
    });
    add("autodiff", "scalar_ops", [](uint64_t s) {
        Rng rng(rng_fold(s, 4));
        std::vector<Tensor<double>> inputs{positive_randn({3, 5}, rng, 0.5)};
        return grad_check_inputs(
                   [](const Leaves& in) {
                       auto x = ad::mul_scalar(ad::add_scalar(in[0], 0.25), 1.5);
                       return weighted_sum(ad::pow_scalar(x, 1.7));
                   },
                   std::move(inputs))
            .max_rel_error;
    });
    add("autodiff", "clamp_min", [](uint64_t s) {
        Rng rng(rng_fold(s, 5));
        // keep values away from the clamp threshold so FD stays one-sided
        Tensor<double> t({4, 4});
        for (auto& v : t.data) v = rng.normal() > 0 ? 0.5 + rng.uniform() : -0.5 - rng.uniform();
        std::vector<Tensor<double>> inputs{std::move(t)};
        return grad_check_inputs(
                   [](const Leaves& in) { return weighted_sum(ad::clamp_min_scalar(in[0], 0.0)); },
                   std::move(inputs))
            .max_rel_error;
    });
    add("autodiff", "conv2d", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) { return weighted_sum(ad::conv2d(in[0], in[1], in[2], 1, 1)); },
            {{3, 6, 6}, {4, 3, 3, 3}, {4}});
    });
    add("autodiff", "conv2d_1x1", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) { return weighted_sum(ad::conv2d(in[0], in[1], in[2], 1, 0)); },
            {{3, 4, 4}, {5, 3, 1, 1}, {5}});
    });
    add("autodiff", "conv2d_strided_overlap", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) { return weighted_sum(ad::conv2d(in[0], in[1], in[2], 2, 1)); },
            {{3, 7, 8}, {4, 3, 3, 3}, {4}});
    });
    add("autodiff", "conv2d_depthwise", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) {
                return weighted_sum(ad::conv2d_depthwise(in[0], in[1], in[2], 1, 1));
            },
            {{4, 5, 5}, {4, 3, 3}, {4}});
    });
    add("autodiff", "layer_norm", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) {
                return weighted_sum(ad::layer_norm(in[0], in[1], in[2], 1));
            },
            {{5, 6}, {6}, {6}});
    });
    add("autodiff", "layer_norm_chw", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) {
                return weighted_sum(ad::layer_norm(in[0], in[1], in[2], 0));
            },
            {{4, 3, 3}, {4}, {4}});
    });
    add("autodiff", "softmax", [](uint64_t s) {
        return suite_simple(s,
                            [](const Leaves& in) { return weighted_sum(ad::softmax(in[0], 1)); },
                            {{4, 6}});
    });
    add("autodiff", "global_avg_pool", [](uint64_t s) {
        return suite_simple(
            s, [](const Leaves& in) { return weighted_sum(ad::global_avg_pool(in[0])); },
            {{3, 4, 5}});
    });
    add("autodiff", "global_max_pool", [](uint64_t s) {
        Rng rng(rng_fold(s, 6));
        std::vector<Tensor<double>> inputs{tie_free({3, 4, 5}, rng)};
        return grad_check_inputs(
                   [](const Leaves& in) { return weighted_sum(ad::global_max_pool(in[0])); },
                   std::move(inputs))
            .max_rel_error;
    });
    add("autodiff", "concat", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) {
                return weighted_sum(ad::concat<double>({in[0], in[1]}, 1));
            },
            {{3, 2}, {3, 4}});
    });
    add("autodiff", "reshape_transpose", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) {
                auto t = ad::transpose(ad::reshape(in[0], {4, 6}), std::vector<int>{1, 0});
                return weighted_sum(t);
            },
            {{2, 3, 4}});
    });
    add("autodiff", "broadcast_to", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) { return weighted_sum(ad::broadcast_to(in[0], {4, 3, 5})); },
            {{3, 1}});
    });
    add("autodiff", "resize_bilinear", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) { return weighted_sum(ad::resize_bilinear_chw(in[0], 7, 9)); },
            {{2, 4, 5}});
    });

    // ---- composite blocks ----
    add("gt-fusion", "dw_proj", [](uint64_t s) {
        return suite_simple(
            s,
            [](const Leaves& in) { return weighted_sum(dw_proj(in[0], in[1], in[2])); },
            {{3, 5, 5}, {3, 3, 3}, {3}});
    });
    add("gt-fusion", "osr", [](uint64_t s) {
        return suite_simple(
            s, [](const Leaves& in) { return weighted_sum(osr(in[0], in[1], in[2])); },
            {{3, 8, 8}, {3, 3, 3, 3}, {3}});
    });
    add("gt-fusion", "ddf", [](uint64_t s) {
        const int c = 3;
        return suite_simple(
            s,
            [](const Leaves& in) {
                FusionParams<double> p;
                p.ddf_gamma_w = in[2];
                p.ddf_gamma_b = in[3];
                p.ddf_conv_w = in[4];
                p.ddf_conv_b = in[5];
                p.ddf_adapt_w = in[6];
                p.ddf_adapt_b = in[7];
                return weighted_sum(ddf(in[0], in[1], p));
            },
            {{c, 4, 4}, {c, 4, 4}, {c, c}, {c}, {c, 2 * c, 3, 3}, {c}, {c, c, 1, 1}, {c}});
    });
    add("gt-fusion", "cross_attention", attention_suite);
    add("gt-fusion", "block", fusion_block_suite);
    add("da-pool", "gem_pool", gem_suite);
    add("da-pool", "da_pool", da_pool_suite);
    add("objective", "info_nce", info_nce_suite);
    add("objective", "clgt_loss", clgt_loss_suite);
}

std::vector<GradSuiteResult> run_grad_suites(const std::string& module_filter, int seeds) {
    register_builtin_grad_suites();
    std::vector<GradSuiteResult> out;
    for (const auto& suite : GradSuiteRegistry::instance().suites()) {
        if (!module_filter.empty() && suite.module != module_filter) continue;
        GradSuiteResult r{suite.module, suite.name, 0.0};
        for (int s = 0; s < seeds; ++s)
            r.max_err = std::max(r.max_err, suite.fn(rng_fold(1000 + s, 0x5EED)));
        out.push_back(std::move(r));
    }
    if (out.empty()) throw ValueError("gradcheck: no suites match module '" + module_filter + "'");
    return out;
}

}  // namespace clgt
