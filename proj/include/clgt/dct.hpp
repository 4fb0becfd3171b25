// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Orthonormal 2D DCT-II, separable as two GEMMs against a cached basis.
// dct2:  Y = C_h * X * C_w^T      idct2: X = C_h^T * Y * C_w
// Basis row k: c(k) * cos(pi * (2n+1) * k / (2N)), c(0)=sqrt(1/N), else sqrt(2/N).

#ifndef CLGT_DCT_HPP
#define CLGT_DCT_HPP

#include <map>
#include <mutex>
#include <vector>

#include "clgt/kernels.hpp"
#include "clgt/tensor.hpp"

namespace clgt {

// Orthonormal DCT-II basis matrix (N x N) in double; cast at the call site.
inline const std::vector<double>& dct_basis(int n) {
    static std::map<int, std::vector<double>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> basis(static_cast<size_t>(n) * n);
    const double c0 = std::sqrt(1.0 / n), ck = std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            basis[static_cast<size_t>(k) * n + i] =
                (k == 0 ? c0 : ck) * std::cos(M_PI * (2.0 * i + 1.0) * k / (2.0 * n));
    return cache.emplace(n, std::move(basis)).first->second;
}

template <typename T>
const std::vector<T>& dct_basis_t(int n) {
    if constexpr (std::is_same_v<T, double>) {
        return dct_basis(n);
    } else {
        static std::map<int, std::vector<T>> cache;
        static std::mutex mu;
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
        const auto& d = dct_basis(n);
        std::vector<T> b(d.size());
        for (size_t i = 0; i < d.size(); ++i) b[i] = static_cast<T>(d[i]);
        return cache.emplace(n, std::move(b)).first->second;
    }
}

template <typename T>
void dct2_plane(const T* x, T* y, int h, int w) {
    if (h < 1 || w < 1) throw ShapeError("dct2: empty plane");
    const auto& ch = dct_basis_t<T>(h);
    const auto& cw = dct_basis_t<T>(w);
    std::vector<T> tmp(static_cast<size_t>(h) * w);
    kernels::matmul(ch.data(), x, tmp.data(), h, h, w);       // C_h * X
    kernels::matmul_nt(tmp.data(), cw.data(), y, h, w, w);    // * C_w^T
}

template <typename T>
void idct2_plane(const T* y, T* x, int h, int w) {
    if (h < 1 || w < 1) throw ShapeError("idct2: empty plane");
    const auto& ch = dct_basis_t<T>(h);
    const auto& cw = dct_basis_t<T>(w);
    std::vector<T> tmp(static_cast<size_t>(h) * w);
    kernels::matmul_tn(ch.data(), y, tmp.data(), h, h, w);    // C_h^T * Y
    kernels::matmul(tmp.data(), cw.data(), x, h, w, w);       // * C_w
}

template <typename T>
Tensor<T> dct2(const Tensor<T>& plane) {
    if (plane.rank() != 2) throw ShapeError("dct2: expected 2D plane, got " + shape_str(plane.shape));
    if (!plane.finite()) throw ValueError("dct2: non-finite input");
    Tensor<T> out(plane.shape);
    dct2_plane(plane.ptr(), out.ptr(), plane.dim(0), plane.dim(1));
    return out;
}

template <typename T>
Tensor<T> idct2(const Tensor<T>& spec) {
    if (spec.rank() != 2) throw ShapeError("idct2: expected 2D plane, got " + shape_str(spec.shape));
    Tensor<T> out(spec.shape);
    idct2_plane(spec.ptr(), out.ptr(), spec.dim(0), spec.dim(1));
    return out;
}

// O(N^4) direct-summation DCT-II, the test oracle for the GEMM path.
template <typename T>
Tensor<T> dct2_direct(const Tensor<T>& plane) {
    const int h = plane.dim(0), w = plane.dim(1);
    Tensor<T> out(plane.shape);
    const double ch0 = std::sqrt(1.0 / h), chk = std::sqrt(2.0 / h);
    const double cw0 = std::sqrt(1.0 / w), cwk = std::sqrt(2.0 / w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            double s = 0;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    s += static_cast<double>(plane.at(i * w + j)) *
                         std::cos(M_PI * (2.0 * i + 1.0) * u / (2.0 * h)) *
                         std::cos(M_PI * (2.0 * j + 1.0) * v / (2.0 * w));
            out.at(u * w + v) =
                static_cast<T>((u == 0 ? ch0 : chk) * (v == 0 ? cw0 : cwk) * s);
        }
    return out;
}

}  // namespace clgt

#endif
