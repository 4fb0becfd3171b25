// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel compute kernels. Every kernel comes in two flavors:
// a plain serial reference (suffix _serial) and an OpenMP variant used by
// the rest of the library. Parallel variants partition work over output
// elements only, each element accumulated in a fixed order, so results do
// not depend on the thread count.

#ifndef CLGT_KERNELS_HPP
#define CLGT_KERNELS_HPP

#include <cstdint>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "clgt/common.hpp"

namespace clgt::kernels {

// ---------------------------------------------------------------------------
// GEMM: y = a (m x k) * b (k x n), row-major
// ---------------------------------------------------------------------------

template <typename T>
void matmul_serial(const T* a, const T* b, T* y, int m, int k, int n) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T s = 0;
            for (int p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            y[i * n + j] = s;
        }
}

template <typename T>
void matmul(const T* a, const T* b, T* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* yi = y + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) yi[j] = 0;
        const T* ai = a + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = ai[p];
            const T* bp = b + static_cast<int64_t>(p) * n;
#pragma omp simd
            for (int j = 0; j < n; ++j) yi[j] += av * bp[j];
        }
    }
}

// y = a (m x k) * b^T, with b stored (n x k)
template <typename T>
void matmul_nt_serial(const T* a, const T* b, T* y, int m, int k, int n) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T s = 0;
            for (int p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            y[i * n + j] = s;
        }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<int64_t>(i) * k;
        T* yi = y + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + static_cast<int64_t>(j) * k;
            T s = 0;
#pragma omp simd reduction(+ : s)
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            yi[j] = s;
        }
    }
}

// y = a^T * b, with a stored (k x m), b stored (k x n)
template <typename T>
void matmul_tn_serial(const T* a, const T* b, T* y, int m, int k, int n) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T s = 0;
            for (int p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
            y[i * n + j] = s;
        }
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* yi = y + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) yi[j] = 0;
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<int64_t>(p) * m + i];
            const T* bp = b + static_cast<int64_t>(p) * n;
#pragma omp simd
            for (int j = 0; j < n; ++j) yi[j] += av * bp[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Convolution plumbing
// ---------------------------------------------------------------------------

inline int conv_out_dim(int in, int k, int stride, int pad) {
    int out = (in + 2 * pad - k) / stride + 1;
    if (out <= 0) throw ShapeError("conv: output dim would be " + std::to_string(out));
    return out;
}

// x: (C, H, W) -> col: (C*kh*kw, Ho*Wo). Zero padding.
template <typename T>
void im2col(const T* x, T* col, int c, int h, int w, int kh, int kw, int stride, int pad, int ho,
            int wo) {
    const int64_t plane = static_cast<int64_t>(ho) * wo;
#pragma omp parallel for schedule(static)
    for (int row = 0; row < c * kh * kw; ++row) {
        const int ci = row / (kh * kw);
        const int ky = (row / kw) % kh;
        const int kx = row % kw;
        T* dst = col + static_cast<int64_t>(row) * plane;
        const T* src = x + static_cast<int64_t>(ci) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= h) {
                for (int ox = 0; ox < wo; ++ox) dst[oy * wo + ox] = 0;
                continue;
            }
            for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride + kx - pad;
                dst[oy * wo + ox] = (ix < 0 || ix >= w) ? T(0) : src[iy * w + ix];
            }
        }
    }
}

// Adjoint of im2col: dX gathered per input pixel (deterministic, race-free).
template <typename T>
void col2im_gather(const T* col, T* dx, int c, int h, int w, int kh, int kw, int stride, int pad,
                   int ho, int wo) {
    const int64_t plane = static_cast<int64_t>(ho) * wo;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c; ++ci) {
        T* dst = dx + static_cast<int64_t>(ci) * h * w;
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                T s = 0;
                for (int ky = 0; ky < kh; ++ky) {
                    const int oy_num = iy + pad - ky;
                    if (oy_num < 0 || oy_num % stride) continue;
                    const int oy = oy_num / stride;
                    if (oy >= ho) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ox_num = ix + pad - kx;
                        if (ox_num < 0 || ox_num % stride) continue;
                        const int ox = ox_num / stride;
                        if (ox >= wo) continue;
                        const int row = (ci * kh + ky) * kw + kx;
                        s += col[row * plane + oy * wo + ox];
                    }
                }
                dst[iy * w + ix] = s;
            }
    }
}

// Direct reference convolution (cross-correlation), zero padding.
// x: (Cin,H,W), wgt: (Cout,Cin,kh,kw), bias: (Cout) or nullptr, y: (Cout,Ho,Wo)
template <typename T>
void conv2d_serial(const T* x, const T* wgt, const T* bias, T* y, int cin, int h, int w, int cout,
                   int kh, int kw, int stride, int pad) {
    const int ho = conv_out_dim(h, kh, stride, pad);
    const int wo = conv_out_dim(w, kw, stride, pad);
    for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                T s = bias ? bias[co] : T(0);
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride + ky - pad;
                            const int ix = ox * stride + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            s += x[(static_cast<int64_t>(ci) * h + iy) * w + ix] *
                                 wgt[((static_cast<int64_t>(co) * cin + ci) * kh + ky) * kw + kx];
                        }
                y[(static_cast<int64_t>(co) * ho + oy) * wo + ox] = s;
            }
}

// Depthwise convolution, one kernel per channel. wgt: (C,kh,kw)
template <typename T>
void conv2d_depthwise_serial(const T* x, const T* wgt, const T* bias, T* y, int c, int h, int w,
                             int kh, int kw, int stride, int pad) {
    const int ho = conv_out_dim(h, kh, stride, pad);
    const int wo = conv_out_dim(w, kw, stride, pad);
    for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                T s = bias ? bias[ci] : T(0);
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        const int iy = oy * stride + ky - pad;
                        const int ix = ox * stride + kx - pad;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                        s += x[(static_cast<int64_t>(ci) * h + iy) * w + ix] *
                             wgt[(static_cast<int64_t>(ci) * kh + ky) * kw + kx];
                    }
                y[(static_cast<int64_t>(ci) * ho + oy) * wo + ox] = s;
            }
}

template <typename T>
void conv2d_depthwise(const T* x, const T* wgt, const T* bias, T* y, int c, int h, int w, int kh,
                      int kw, int stride, int pad) {
    const int ho = conv_out_dim(h, kh, stride, pad);
    const int wo = conv_out_dim(w, kw, stride, pad);
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                T s = bias ? bias[ci] : T(0);
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        const int iy = oy * stride + ky - pad;
                        const int ix = ox * stride + kx - pad;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                        s += x[(static_cast<int64_t>(ci) * h + iy) * w + ix] *
                             wgt[(static_cast<int64_t>(ci) * kh + ky) * kw + kx];
                    }
                y[(static_cast<int64_t>(ci) * ho + oy) * wo + ox] = s;
            }
}

// Depthwise backward w.r.t. input, gather form.
template <typename T>
void conv2d_depthwise_dx(const T* dy, const T* wgt, T* dx, int c, int h, int w, int kh, int kw,
                         int stride, int pad, int ho, int wo) {
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c; ++ci)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < w; ++ix) {
                T s = 0;
                for (int ky = 0; ky < kh; ++ky) {
                    const int oy_num = iy + pad - ky;
                    if (oy_num < 0 || oy_num % stride) continue;
                    const int oy = oy_num / stride;
                    if (oy >= ho) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ox_num = ix + pad - kx;
                        if (ox_num < 0 || ox_num % stride) continue;
                        const int ox = ox_num / stride;
                        if (ox >= wo) continue;
                        s += dy[(static_cast<int64_t>(ci) * ho + oy) * wo + ox] *
                             wgt[(static_cast<int64_t>(ci) * kh + ky) * kw + kx];
                    }
                }
                dx[(static_cast<int64_t>(ci) * h + iy) * w + ix] = s;
            }
}

// Depthwise backward w.r.t. weights.
template <typename T>
void conv2d_depthwise_dw(const T* dy, const T* x, T* dw, int c, int h, int w, int kh, int kw,
                         int stride, int pad, int ho, int wo) {
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                T s = 0;
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        const int iy = oy * stride + ky - pad;
                        const int ix = ox * stride + kx - pad;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                        s += dy[(static_cast<int64_t>(ci) * ho + oy) * wo + ox] *
                             x[(static_cast<int64_t>(ci) * h + iy) * w + ix];
                    }
                dw[(static_cast<int64_t>(ci) * kh + ky) * kw + kx] = s;
            }
}

// ---------------------------------------------------------------------------
// Elementwise helpers
// ---------------------------------------------------------------------------

template <typename T, typename F>
void map_unary(const T* x, T* y, int64_t n, F f) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

template <typename T>
void axpy(T alpha, const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace clgt::kernels

#endif
