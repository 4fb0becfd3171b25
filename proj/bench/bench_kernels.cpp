// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial-vs-OpenMP kernel timings. Usage: clgt_bench [reps]

#include <chrono>
#include <cstdio>
#include <functional>

#include "clgt/bev.hpp"
#include "clgt/dct.hpp"
#include "clgt/kernels.hpp"
#include "clgt/tensor.hpp"
#include "clgt/threading.hpp"

namespace {

using clgt::Rng;
using clgt::Tensor;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-26s serial %9.3f ms   omp %9.3f ms   speedup %.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    clgt::init_threads_from_env();
    const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    std::printf("threads: %d, reps: %d\n", clgt::kernels::max_threads(), reps);
    Rng rng(42);

    {  // GEMM, float
        const int n = 256;
        auto a = Tensor<float>::randn({n, n}, rng);
        auto b = Tensor<float>::randn({n, n}, rng);
        Tensor<float> y({n, n});
        report("matmul 256x256x256 f32",
               time_ms([&] { clgt::kernels::matmul_serial(a.ptr(), b.ptr(), y.ptr(), n, n, n); }, reps),
               time_ms([&] { clgt::kernels::matmul(a.ptr(), b.ptr(), y.ptr(), n, n, n); }, reps));
    }
    {  // encoder-shaped conv
        const int cin = 16, cout = 32, h = 32, w = 32;
        auto x = Tensor<float>::randn({cin, h, w}, rng);
        auto wgt = Tensor<float>::randn({cout, cin, 3, 3}, rng);
        auto bias = Tensor<float>::randn({cout}, rng);
        const int ho = clgt::kernels::conv_out_dim(h, 3, 2, 1);
        const int wo = clgt::kernels::conv_out_dim(w, 3, 2, 1);
        Tensor<float> y({cout, ho, wo});
        const int cik = cin * 9;
        Tensor<float> col({cik, ho * wo});
        report("conv 16->32 32x32 s2",
               time_ms(
                   [&] {
                       clgt::kernels::conv2d_serial(x.ptr(), wgt.ptr(), bias.ptr(), y.ptr(), cin, h,
                                                    w, cout, 3, 3, 2, 1);
                   },
                   reps),
               time_ms(
                   [&] {
                       clgt::kernels::im2col(x.ptr(), col.ptr(), cin, h, w, 3, 3, 2, 1, ho, wo);
                       clgt::kernels::matmul(wgt.ptr(), col.ptr(), y.ptr(), cout, cik, ho * wo);
                   },
                   reps));
    }
    {  // DCT of a panorama-sized plane
        const int h = 128, w = 256;
        auto x = Tensor<double>::randn({h, w}, rng);
        Tensor<double> y({h, w});
        const auto& ch = clgt::dct_basis_t<double>(h);
        const auto& cw = clgt::dct_basis_t<double>(w);
        Tensor<double> tmp({h, w});
        report(
            "dct2 128x256 f64",
            time_ms(
                [&] {
                    clgt::kernels::matmul_serial(ch.data(), x.ptr(), tmp.ptr(), h, h, w);
                    clgt::kernels::matmul_nt_serial(tmp.ptr(), cw.data(), y.ptr(), h, w, w);
                },
                reps),
            time_ms([&] { clgt::dct2_plane(x.ptr(), y.ptr(), h, w); }, reps));
    }
    {  // BEV projection
        clgt::Image pano(256, 512, 3);
        for (size_t i = 0; i < pano.data.size(); ++i)
            pano.data[i] = static_cast<float>((i * 2654435761u % 1000) / 1000.0);
        clgt::BevConfig cfg;
        auto serial = [&] {
            // single-threaded reference: restrict OpenMP to one thread
#ifdef _OPENMP
            const int prev = clgt::kernels::max_threads();
            omp_set_num_threads(1);
            auto out = clgt::panorama_to_bev(pano, cfg);
            omp_set_num_threads(prev);
#else
            auto out = clgt::panorama_to_bev(pano, cfg);
#endif
            (void)out;
        };
        report("panorama_to_bev 512->128",
               time_ms(serial, reps),
               time_ms([&] { auto out = clgt::panorama_to_bev(pano, cfg); (void)out; }, reps));
    }
    return 0;
}
