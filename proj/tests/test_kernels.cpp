// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parallel kernels against their serial references.

#include <doctest.h>

#include "clgt/kernels.hpp"
#include "clgt/rng.hpp"
#include "clgt/tensor.hpp"

using namespace clgt;

namespace {

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

}  // namespace

TEST_CASE("matmul variants match serial references") {
    Rng rng(11);
    const int m = 17, k = 23, n = 13;
    auto a = Tensor<double>::randn({m, k}, rng);
    auto b = Tensor<double>::randn({k, n}, rng);
    Tensor<double> y1({m, n}), y2({m, n});

    kernels::matmul_serial(a.ptr(), b.ptr(), y1.ptr(), m, k, n);
    kernels::matmul(a.ptr(), b.ptr(), y2.ptr(), m, k, n);
    CHECK(max_abs_diff(y1.data, y2.data) < 1e-12);

    auto bt = Tensor<double>::randn({n, k}, rng);
    kernels::matmul_nt_serial(a.ptr(), bt.ptr(), y1.ptr(), m, k, n);
    kernels::matmul_nt(a.ptr(), bt.ptr(), y2.ptr(), m, k, n);
    CHECK(max_abs_diff(y1.data, y2.data) < 1e-12);

    auto at = Tensor<double>::randn({k, m}, rng);
    auto b2 = Tensor<double>::randn({k, n}, rng);
    kernels::matmul_tn_serial(at.ptr(), b2.ptr(), y1.ptr(), m, k, n);
    kernels::matmul_tn(at.ptr(), b2.ptr(), y2.ptr(), m, k, n);
    CHECK(max_abs_diff(y1.data, y2.data) < 1e-12);
}

TEST_CASE("im2col+gemm convolution matches the direct serial loop") {
    Rng rng(12);
    const int cin = 3, h = 9, w = 11, cout = 5;
    auto x = Tensor<double>::randn({cin, h, w}, rng);
    auto wgt = Tensor<double>::randn({cout, cin, 3, 3}, rng);
    auto bias = Tensor<double>::randn({cout}, rng);
    for (int stride : {1, 2}) {
        const int ho = kernels::conv_out_dim(h, 3, stride, 1);
        const int wo = kernels::conv_out_dim(w, 3, stride, 1);
        Tensor<double> direct({cout, ho, wo}), viacol({cout, ho, wo});
        kernels::conv2d_serial(x.ptr(), wgt.ptr(), bias.ptr(), direct.ptr(), cin, h, w, cout, 3, 3,
                               stride, 1);
        Tensor<double> col({cin * 9, ho * wo});
        kernels::im2col(x.ptr(), col.ptr(), cin, h, w, 3, 3, stride, 1, ho, wo);
        kernels::matmul(wgt.ptr(), col.ptr(), viacol.ptr(), cout, cin * 9, ho * wo);
        for (int co = 0; co < cout; ++co)
            for (int i = 0; i < ho * wo; ++i) viacol.at(co * ho * wo + i) += bias.at(co);
        CHECK(max_abs_diff(direct.data, viacol.data) < 1e-12);
    }
}

TEST_CASE("depthwise conv parallel equals serial bitwise") {
    Rng rng(13);
    const int c = 6, h = 8, w = 10;
    auto x = Tensor<float>::randn({c, h, w}, rng);
    auto wgt = Tensor<float>::randn({c, 3, 3}, rng);
    auto bias = Tensor<float>::randn({c}, rng);
    Tensor<float> y1({c, h, w}), y2({c, h, w});
    kernels::conv2d_depthwise_serial(x.ptr(), wgt.ptr(), bias.ptr(), y1.ptr(), c, h, w, 3, 3, 1, 1);
    kernels::conv2d_depthwise(x.ptr(), wgt.ptr(), bias.ptr(), y2.ptr(), c, h, w, 3, 3, 1, 1);
    CHECK(y1.data == y2.data);  // identical per-element evaluation order
}

TEST_CASE("col2im gather is the exact adjoint of im2col") {
    // <dY, im2col(x)> == <col2im(dY), x> for random pairs
    Rng rng(14);
    const int c = 2, h = 6, w = 7, kh = 3, kw = 3, stride = 2, pad = 1;
    const int ho = kernels::conv_out_dim(h, kh, stride, pad);
    const int wo = kernels::conv_out_dim(w, kw, stride, pad);
    auto x = Tensor<double>::randn({c, h, w}, rng);
    auto dy = Tensor<double>::randn({c * kh * kw, ho * wo}, rng);
    Tensor<double> col({c * kh * kw, ho * wo});
    kernels::im2col(x.ptr(), col.ptr(), c, h, w, kh, kw, stride, pad, ho, wo);
    Tensor<double> dx({c, h, w});
    kernels::col2im_gather(dy.ptr(), dx.ptr(), c, h, w, kh, kw, stride, pad, ho, wo);
    double lhs = 0, rhs = 0;
    for (int64_t i = 0; i < col.numel(); ++i) lhs += dy.at(i) * col.at(i);
    for (int64_t i = 0; i < x.numel(); ++i) rhs += dx.at(i) * x.at(i);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("conv rejects impossible geometry") {
    CHECK_THROWS_AS(kernels::conv_out_dim(1, 3, 2, 0), ShapeError);
}
