// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Geometric topology fusion block. Street features query BEV features:
//   Xs' = dwconv(Xs) + Xs,  Xb' = dwconv(Xb) + Xb
//   Q   = LN(OSR(Xs') + sub2(Xs')),  K,V = LN(OSR(Xb') + sub2(Xb'))
//   Z   = softmax(Q K^T / sqrt(d) + B) V      (per head, learned bias B)
//   out = DDF(Xs, upsample(Z)) + Xs
// OSR is a channel-preserving conv (k3, s2, p1) whose overlapping windows
// keep neighboring tokens coupled; the residual inside the attention path
// is the stride-2 subsample of the full-resolution map.

#ifndef CLGT_FUSION_HPP
#define CLGT_FUSION_HPP

#include <vector>

#include "clgt/composites.hpp"
#include "clgt/rng.hpp"

namespace clgt {

struct FusionConfig {
    int channels = 32;
    int heads = 4;
    int h = 8, w = 8;  // feature map size entering the block

    int head_dim() const { return channels / heads; }
    int rh() const { return (h + 1) / 2; }
    int rw() const { return (w + 1) / 2; }
    int tokens() const { return rh() * rw(); }
    int table_size() const { return (2 * rh() - 1) * (2 * rw() - 1); }

    void validate() const {
        if (channels <= 0 || heads <= 0 || channels % heads != 0)
            throw ValueError("FusionConfig: head count must divide channel count");
        if (h < 2 || w < 2) throw ValueError("FusionConfig: feature map must be at least 2x2");
    }
};

template <typename T>
struct FusionParams {
    Var<T> dw_s_w, dw_s_b, dw_b_w, dw_b_b;        // depthwise 3x3 (C,3,3) + (C)
    Var<T> osr_q_w, osr_q_b, osr_kv_w, osr_kv_b;  // (C,C,3,3) + (C)
    Var<T> ln_q_g, ln_q_b, ln_kv_g, ln_kv_b;      // (C)
    std::vector<Var<T>> wq, bq, wk, bk, wv, bv;   // per head (C,d) + (d)
    Var<T> wo_w, wo_b;                            // (C,C) + (C)
    std::vector<Var<T>> bias_table;               // per head (table_size, 1)
    Var<T> ddf_gamma_w, ddf_gamma_b;              // (C,C) + (C)
    Var<T> ddf_conv_w, ddf_conv_b;                // (C,2C,3,3) + (C)
    Var<T> ddf_adapt_w, ddf_adapt_b;              // (C,C,1,1) + (C)

    std::vector<std::pair<std::string, Var<T>>> named(const std::string& prefix) const;
};

template <typename T>
using Var = ad::Var<T>;

namespace detail {

// Orthonormal columns (rows x cols, cols <= rows), Gram-Schmidt on a seeded
// Gaussian matrix.
template <typename T>
Tensor<T> orthogonal_init(int rows, int cols, Rng& rng, double scale) {
    if (cols > rows) throw ValueError("orthogonal_init: cols > rows");
    std::vector<std::vector<double>> q;
    for (int c = 0; c < cols; ++c) {
        std::vector<double> v(static_cast<size_t>(rows));
        for (auto& x : v) x = rng.normal();
        for (const auto& u : q) {
            double dot = 0;
            for (int i = 0; i < rows; ++i) dot += v[static_cast<size_t>(i)] * u[static_cast<size_t>(i)];
            for (int i = 0; i < rows; ++i) v[static_cast<size_t>(i)] -= dot * u[static_cast<size_t>(i)];
        }
        double norm = 0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-12) norm = 1.0;
        for (auto& x : v) x /= norm;
        q.push_back(std::move(v));
    }
    Tensor<T> m({rows, cols});
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m.at(static_cast<int64_t>(r) * cols + c) =
                static_cast<T>(scale * q[static_cast<size_t>(c)][static_cast<size_t>(r)]);
    return m;
}

// Delta kernel: center tap 1, acts as stride-2 subsampling at init.
template <typename T>
Tensor<T> delta_conv_init(int c) {
    Tensor<T> w({c, c, 3, 3});
    for (int i = 0; i < c; ++i) w.at(((static_cast<int64_t>(i) * c + i) * 3 + 1) * 3 + 1) = T(1);
    return w;
}

}  // namespace detail

enum class FusionInit { Default, Zero };

template <typename T>
FusionParams<T> init_fusion_params(const FusionConfig& cfg, uint64_t seed,
                                   FusionInit mode = FusionInit::Default) {
    cfg.validate();
    const int c = cfg.channels, d = cfg.head_dim();
    Rng rng(rng_fold(seed, 0xF5101));
    FusionParams<T> p;
    const bool zero = mode == FusionInit::Zero;
    auto zeros = [](std::vector<int> s) { return Tensor<T>(std::move(s)); };
    auto lnw = [&](T v) { return zero ? T(0) : v; };

    p.dw_s_w = ad::param(zeros({c, 3, 3}), "dw_s.w");
    p.dw_s_b = ad::param(zeros({c}), "dw_s.b");
    p.dw_b_w = ad::param(zeros({c, 3, 3}), "dw_b.w");
    p.dw_b_b = ad::param(zeros({c}), "dw_b.b");
    p.osr_q_w = ad::param(zero ? zeros({c, c, 3, 3}) : detail::delta_conv_init<T>(c), "osr_q.w");
    p.osr_q_b = ad::param(zeros({c}), "osr_q.b");
    p.osr_kv_w = ad::param(zero ? zeros({c, c, 3, 3}) : detail::delta_conv_init<T>(c), "osr_kv.w");
    p.osr_kv_b = ad::param(zeros({c}), "osr_kv.b");
    p.ln_q_g = ad::param(Tensor<T>::full({c}, lnw(T(1))), "ln_q.g");
    p.ln_q_b = ad::param(zeros({c}), "ln_q.b");
    p.ln_kv_g = ad::param(Tensor<T>::full({c}, lnw(T(1))), "ln_kv.g");
    p.ln_kv_b = ad::param(zeros({c}), "ln_kv.b");
    for (int h = 0; h < cfg.heads; ++h) {
        const std::string tag = "head" + std::to_string(h);
        Rng rq = rng.split(rng_fold(static_cast<uint64_t>(h), 1));
        Rng rk = rng.split(rng_fold(static_cast<uint64_t>(h), 2));
        Rng rv = rng.split(rng_fold(static_cast<uint64_t>(h), 3));
        p.wq.push_back(ad::param(zero ? zeros({c, d}) : detail::orthogonal_init<T>(c, d, rq, 0.02),
                                 tag + ".wq"));
        p.bq.push_back(ad::param(zeros({d}), tag + ".bq"));
        p.wk.push_back(ad::param(zero ? zeros({c, d}) : detail::orthogonal_init<T>(c, d, rk, 0.02),
                                 tag + ".wk"));
        p.bk.push_back(ad::param(zeros({d}), tag + ".bk"));
        p.wv.push_back(ad::param(zero ? zeros({c, d}) : detail::orthogonal_init<T>(c, d, rv, 0.02),
                                 tag + ".wv"));
        p.bv.push_back(ad::param(zeros({d}), tag + ".bv"));
        p.bias_table.push_back(ad::param(zeros({cfg.table_size(), 1}), tag + ".bias_table"));
    }
    Rng ro = rng.split(99);
    p.wo_w = ad::param(zero ? zeros({c, c}) : detail::orthogonal_init<T>(c, c, ro, 0.02), "wo.w");
    p.wo_b = ad::param(zeros({c}), "wo.b");
    p.ddf_gamma_w = ad::param(zeros({c, c}), "ddf.gamma.w");
    p.ddf_gamma_b = ad::param(zeros({c}), "ddf.gamma.b");
    p.ddf_conv_w = ad::param(zeros({c, 2 * c, 3, 3}), "ddf.conv_fuse.w");
    p.ddf_conv_b = ad::param(zeros({c}), "ddf.conv_fuse.b");
    p.ddf_adapt_w = ad::param(zeros({c, c, 1, 1}), "ddf.w_adapt.w");
    p.ddf_adapt_b = ad::param(zeros({c}), "ddf.w_adapt.b");
    return p;
}

template <typename T>
std::vector<std::pair<std::string, Var<T>>> FusionParams<T>::named(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, Var<T>>> out;
    auto push = [&](const Var<T>& v) {
        if (v) out.emplace_back(prefix + v->name, v);
    };
    push(dw_s_w);
    push(dw_s_b);
    push(dw_b_w);
    push(dw_b_b);
    push(osr_q_w);
    push(osr_q_b);
    push(osr_kv_w);
    push(osr_kv_b);
    push(ln_q_g);
    push(ln_q_b);
    push(ln_kv_g);
    push(ln_kv_b);
    for (size_t h = 0; h < wq.size(); ++h) {
        push(wq[h]);
        push(bq[h]);
        push(wk[h]);
        push(bk[h]);
        push(wv[h]);
        push(bv[h]);
        push(bias_table[h]);
    }
    push(wo_w);
    push(wo_b);
    push(ddf_gamma_w);
    push(ddf_gamma_b);
    push(ddf_conv_w);
    push(ddf_conv_b);
    push(ddf_adapt_w);
    push(ddf_adapt_b);
    return out;
}

// Depthwise 3x3 projection with residual; shape-preserving.
template <typename T>
Var<T> dw_proj(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    return ad::add(ad::conv2d_depthwise(x, w, b, 1, 1), x);
}

// Overlapping spatial reduction: channel-preserving conv, k3 s2 p1.
template <typename T>
Var<T> osr(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    if (x->value.rank() != 3 || x->value.dim(1) < 2 || x->value.dim(2) < 2)
        throw ShapeError("osr: spatial dims must be >= 2, got " + shape_str(x->value.shape));
    return ad::conv2d(x, w, b, 2, 1);
}

namespace detail {

// (C,h,w) -> (N,C) token matrix
template <typename T>
Var<T> to_tokens(const Var<T>& x) {
    const int c = x->value.dim(0), n = x->value.dim(1) * x->value.dim(2);
    return ad::transpose(ad::reshape(x, {c, n}));
}

template <typename T>
Var<T> from_tokens(const Var<T>& t, int h, int w) {
    const int c = t->value.dim(1);
    return ad::reshape(ad::transpose(t), {c, h, w});
}

// One-hot gather matrix (N*N, S) mapping the bias table onto token pairs by
// clipped relative offset.
template <typename T>
Tensor<T> bias_gather_matrix(const FusionConfig& cfg) {
    const int rh = cfg.rh(), rw = cfg.rw(), n = cfg.tokens(), s = cfg.table_size();
    Tensor<T> g({n * n, s});
    for (int q = 0; q < n; ++q)
        for (int k = 0; k < n; ++k) {
            const int dr = std::clamp(q / rw - k / rw, -(rh - 1), rh - 1) + rh - 1;
            const int dc = std::clamp(q % rw - k % rw, -(rw - 1), rw - 1) + rw - 1;
            g.at(static_cast<int64_t>(q * n + k) * s + dr * (2 * rw - 1) + dc) = T(1);
        }
    return g;
}

}  // namespace detail

// Relative-position-biased multi-head cross attention between the two
// projected streams; output is upsampled back to the input resolution.
template <typename T>
Var<T> cross_attention(const Var<T>& xs, const Var<T>& xb, const FusionParams<T>& p,
                       const FusionConfig& cfg) {
    cfg.validate();
    if (xs->value.shape != xb->value.shape)
        throw_shape_mismatch("cross_attention", xs->value.shape, xb->value.shape);
    const int c = xs->value.dim(0), h = xs->value.dim(1), w = xs->value.dim(2);
    if (c != cfg.channels) throw_shape_mismatch("cross_attention", xs->value.shape, {cfg.channels, h, w});
    if (h != cfg.h || w != cfg.w)
        throw ValueError("cross_attention: bias table configured for " + std::to_string(cfg.h) +
                         "x" + std::to_string(cfg.w) + " maps, got " + shape_str(xs->value.shape));
    const int n = cfg.tokens(), d = cfg.head_dim();

    auto q_map = ad::add(osr(xs, p.osr_q_w, p.osr_q_b), ad::subsample2_chw(xs));
    auto kv_map = ad::add(osr(xb, p.osr_kv_w, p.osr_kv_b), ad::subsample2_chw(xb));
    auto tok_q = ad::layer_norm(detail::to_tokens(q_map), p.ln_q_g, p.ln_q_b, 1);
    auto tok_kv = ad::layer_norm(detail::to_tokens(kv_map), p.ln_kv_g, p.ln_kv_b, 1);

    static_assert(std::is_floating_point_v<T>);
    auto gather = ad::constant(detail::bias_gather_matrix<T>(cfg));
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    std::vector<Var<T>> heads;
    heads.reserve(static_cast<size_t>(cfg.heads));
    for (int hd = 0; hd < cfg.heads; ++hd) {
        const auto hi = static_cast<size_t>(hd);
        auto q = ad::linear(tok_q, p.wq[hi], p.bq[hi]);   // (N,d)
        auto k = ad::linear(tok_kv, p.wk[hi], p.bk[hi]);  // (N,d)
        auto v = ad::linear(tok_kv, p.wv[hi], p.bv[hi]);  // (N,d)
        auto bias = ad::reshape(ad::matmul(gather, p.bias_table[hi]), {n, n});
        auto scores = ad::add(ad::mul_scalar(ad::matmul(q, ad::transpose(k)), scale), bias);
        auto attn = ad::softmax(scores, 1);
        heads.push_back(ad::matmul(attn, v));
    }
    auto merged = ad::linear(cfg.heads == 1 ? heads[0] : ad::concat(heads, 1), p.wo_w, p.wo_b);
    return ad::resize_bilinear_chw(detail::from_tokens(merged, cfg.rh(), cfg.rw()), h, w);
}

// Dual dynamic fusion: channel gate from joint context, 3x3 fusion conv over
// the gated concatenation, then the adaptive channel recalibration.
template <typename T>
Var<T> ddf(const Var<T>& fs, const Var<T>& fg, const FusionParams<T>& p) {
    if (fs->value.shape != fg->value.shape)
        throw_shape_mismatch("ddf", fs->value.shape, fg->value.shape);
    auto pooled = ad::as_row(ad::global_avg_pool(ad::add(fs, fg)));
    auto w_gate = ad::as_vec(ad::sigmoid(ad::linear(pooled, p.ddf_gamma_w, p.ddf_gamma_b)));
    auto anti_gate = ad::add_scalar(ad::mul_scalar(w_gate, -1.0), 1.0);
    auto gated = ad::concat<T>({ad::channel_scale(fs, w_gate), ad::channel_scale(fg, anti_gate)}, 0);
    auto mix = ad::conv2d(gated, p.ddf_conv_w, p.ddf_conv_b, 1, 1);
    const int c = mix->value.dim(0);
    auto ctx = ad::reshape(ad::global_avg_pool(mix), {c, 1, 1});
    auto a = ad::as_vec(ad::sigmoid(ad::conv2d(ctx, p.ddf_adapt_w, p.ddf_adapt_b, 1, 0)));
    return ad::channel_scale(mix, a);
}

template <typename T>
Var<T> gt_fusion_forward(const Var<T>& xs, const Var<T>& xb, const FusionParams<T>& p,
                         const FusionConfig& cfg) {
    if (xs->value.shape != xb->value.shape)
        throw_shape_mismatch("gt_fusion", xs->value.shape, xb->value.shape);
    auto xs_p = dw_proj(xs, p.dw_s_w, p.dw_s_b);
    auto xb_p = dw_proj(xb, p.dw_b_w, p.dw_b_b);
    auto z = cross_attention(xs_p, xb_p, p, cfg);
    return ad::add(ddf(xs, z, p), xs);
}

}  // namespace clgt

#endif
