// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// InfoNCE over dot-product similarities with diagonal positives, plus the
// combined three-term objective:
//   total = L(f,S) + gamma * L(f,s*) + alpha * L(s,b)
// Rows are expected L2-normalized by the embedding path; the loss itself
// only stabilizes via row-max subtraction (a constant shift, exact in the
// gradient).

#ifndef CLGT_LOSS_HPP
#define CLGT_LOSS_HPP

#include "clgt/composites.hpp"

namespace clgt {

struct LossConfig {
    double tau = 0.1;
    double alpha = 0.1;
    double gamma = 0.1;
    bool symmetric = false;

    void validate() const {
        if (tau <= 0) throw ValueError("LossConfig: tau must be > 0");
        if (alpha < 0 || gamma < 0) throw ValueError("LossConfig: weights must be >= 0");
    }
};

namespace detail {

template <typename T>
ad::Var<T> info_nce_one_way(const ad::Var<T>& queries, const ad::Var<T>& refs, double tau) {
    const int b = queries->value.dim(0);
    auto scaled = ad::mul_scalar(ad::matmul(queries, ad::transpose(refs)), 1.0 / tau);
    // Row maxima as constants: softmax shift invariance makes them exact.
    Tensor<T> rowmax({b, 1});
    for (int i = 0; i < b; ++i) {
        T m = scaled->value.at(static_cast<int64_t>(i) * b);
        for (int j = 1; j < b; ++j) m = std::max(m, scaled->value.at(static_cast<int64_t>(i) * b + j));
        rowmax.at(i) = m;
    }
    auto cmax = ad::constant(rowmax);
    auto lse = ad::log(ad::sum_rows(ad::exp(ad::sub(scaled, cmax))));  // (B,1)
    Tensor<T> eye({b, b});
    for (int i = 0; i < b; ++i) eye.at(static_cast<int64_t>(i) * b + i) = T(1);
    auto diag = ad::sum_rows(ad::mul(scaled, ad::constant(eye)));  // (B,1)
    return ad::mean_all(ad::sub(ad::add(lse, cmax), diag));
}

}  // namespace detail

// Mean over queries of -log softmax similarity to the diagonal positive.
template <typename T>
ad::Var<T> info_nce(const ad::Var<T>& queries, const ad::Var<T>& refs, double tau,
                    bool symmetric = false) {
    if (tau <= 0) throw ValueError("info_nce: tau must be > 0");
    if (queries->value.rank() != 2 || refs->value.shape != queries->value.shape)
        throw_shape_mismatch("info_nce", queries->value.shape, refs->value.shape);
    auto fwd = detail::info_nce_one_way(queries, refs, tau);
    if (!symmetric) return fwd;
    return ad::mul_scalar(ad::add(fwd, detail::info_nce_one_way(refs, queries, tau)), 0.5);
}

template <typename T>
struct ClgtLossOut {
    ad::Var<T> total;
    double main = 0, causal = 0, geo = 0;
};

// f: fused street embeddings, aerial_refs: aerial embeddings, street_star:
// embeddings of the causally intervened street input (may be null when the
// causal term is inactive), street_raw/bev: pre-fusion embeddings.
template <typename T>
ClgtLossOut<T> clgt_loss(const ad::Var<T>& f, const ad::Var<T>& aerial_refs,
                         const ad::Var<T>& street_star, const ad::Var<T>& street_raw,
                         const ad::Var<T>& bev, const LossConfig& cfg) {
    cfg.validate();
    ClgtLossOut<T> out;
    auto main = info_nce(f, aerial_refs, cfg.tau, cfg.symmetric);
    out.main = main->value.at(0);
    out.total = main;
    if (street_star) {
        auto causal = info_nce(f, street_star, cfg.tau, cfg.symmetric);
        out.causal = causal->value.at(0);
        if (cfg.gamma > 0) out.total = ad::add(out.total, ad::mul_scalar(causal, cfg.gamma));
    }
    if (street_raw && bev) {
        auto geo = info_nce(street_raw, bev, cfg.tau, cfg.symmetric);
        out.geo = geo->value.at(0);
        if (cfg.alpha > 0) out.total = ad::add(out.total, ad::mul_scalar(geo, cfg.alpha));
    }
    return out;
}

}  // namespace clgt

#endif
