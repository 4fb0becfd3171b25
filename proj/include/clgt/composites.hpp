// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers composed from the core op catalog. No new differentiable
// primitives live here: resizes are matmuls against fixed interpolation
// matrices, reductions are matmuls against ones, subsampling is a 1x1
// stride-2 depthwise conv with constant unit weights.

#ifndef CLGT_COMPOSITES_HPP
#define CLGT_COMPOSITES_HPP

#include "clgt/autodiff.hpp"

namespace clgt::ad {

template <typename T>
Var<T> ones_const(std::vector<int> shape) {
    return constant(Tensor<T>::full(std::move(shape), T(1)));
}

// x: (N,C), w: (C,M), b: (M) -> (N,M)
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    auto y = matmul(x, w);
    return b ? add(y, b) : y;
}

// (N,M) -> (N,1)
template <typename T>
Var<T> sum_rows(const Var<T>& x) {
    return matmul(x, ones_const<T>({x->value.dim(1), 1}));
}

// any shape -> scalar {1}
template <typename T>
Var<T> sum_all(const Var<T>& x) {
    auto flat = reshape(x, {1, static_cast<int>(x->value.numel())});
    return reshape(matmul(flat, ones_const<T>({static_cast<int>(x->value.numel()), 1})), {1});
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x->value.numel()));
}

// Rows of x scaled to unit L2 norm. x: (N,D)
template <typename T>
Var<T> l2_normalize_rows(const Var<T>& x) {
    auto sq = mul(x, x);
    auto norms = pow_scalar(sum_rows(sq), 0.5);  // (N,1)
    return div(x, norms);
}

// (C,H,W) -> (C,ceil(H/2),ceil(W/2)) by stride-2 top-left subsampling.
template <typename T>
Var<T> subsample2_chw(const Var<T>& x) {
    const int c = x->value.dim(0);
    auto w = constant(Tensor<T>::full({c, 1, 1}, T(1)));
    return conv2d_depthwise(x, w, Var<T>{}, 2, 0);
}

// Bilinear 1D interpolation matrix (out x in), half-pixel centers.
template <typename T>
Tensor<T> interp_matrix(int out, int in) {
    Tensor<T> m({out, in});
    for (int i = 0; i < out; ++i) {
        const double src = (i + 0.5) * static_cast<double>(in) / out - 0.5;
        int i0 = static_cast<int>(std::floor(src));
        double f = src - i0;
        if (i0 < 0) {
            i0 = 0;
            f = 0;
        }
        if (i0 >= in - 1) {
            i0 = in - 1;
            f = 0;
        }
        m.at(i * in + i0) += static_cast<T>(1.0 - f);
        if (f > 0) m.at(i * in + i0 + 1) += static_cast<T>(f);
    }
    return m;
}

// Bilinear resize of (C,H,W) to (C,h2,w2) via two matmuls over all channels.
template <typename T>
Var<T> resize_bilinear_chw(const Var<T>& x, int h2, int w2) {
    const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    if (h2 == h && w2 == w) return x;
    auto rw = constant(interp_matrix<T>(w2, w));  // (w2, w)
    auto rh = constant(interp_matrix<T>(h2, h));  // (h2, h)
    // columns: (C*H, w) * rw^T -> reshape back
    auto cols = matmul(reshape(x, {c * h, w}), transpose(rw));
    auto xw = reshape(cols, {c, h, w2});
    // rows: bring H to front, single matmul, restore layout
    auto perm = transpose(xw, {1, 0, 2});                      // (h, c, w2)
    auto rows = matmul(rh, reshape(perm, {h, c * w2}));        // (h2, c*w2)
    return transpose(reshape(rows, {h2, c, w2}), {1, 0, 2});   // (c, h2, w2)
}

// Per-channel gate g (C) applied to x (C,H,W).
template <typename T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& g) {
    return mul(x, reshape(g, {g->value.dim(0), 1, 1}));
}

// 1xC row view of a length-C vector.
template <typename T>
Var<T> as_row(const Var<T>& v) {
    return reshape(v, {1, static_cast<int>(v->value.numel())});
}

template <typename T>
Var<T> as_vec(const Var<T>& v) {
    return reshape(v, {static_cast<int>(v->value.numel())});
}

}  // namespace clgt::ad

#endif
