// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Data-adaptive pooling: the max, average and generalized-mean descriptors
// are summed, passed through a linear map, and self-gated:
//   out = sigmoid(gate(h)) * h,  h = lin(max + avg + gem)
// GeM clamps inputs at eps before exponentiation; its exponent p is a
// learnable scalar kept >= 1 by the trainer.

#ifndef CLGT_POOLING_HPP
#define CLGT_POOLING_HPP

#include "clgt/composites.hpp"
#include "clgt/rng.hpp"

namespace clgt {

template <typename T>
struct DaPoolParams {
    ad::Var<T> p;              // {1}
    ad::Var<T> lin_w, lin_b;   // (C,C), (C)
    ad::Var<T> gate_w, gate_b; // (C,C), (C)

    std::vector<std::pair<std::string, ad::Var<T>>> named(const std::string& prefix) const {
        return {{prefix + "p", p},
                {prefix + "lin.w", lin_w},
                {prefix + "lin.b", lin_b},
                {prefix + "gate.w", gate_w},
                {prefix + "gate.b", gate_b}};
    }
};

// Identity linear + zero gate start: the gate opens at 0.5 everywhere.
template <typename T>
DaPoolParams<T> init_da_pool_params(int channels, double p_init = 3.0) {
    DaPoolParams<T> pp;
    pp.p = ad::param(Tensor<T>::scalar(static_cast<T>(p_init)), "p");
    Tensor<T> eye({channels, channels});
    for (int i = 0; i < channels; ++i) eye.at(static_cast<int64_t>(i) * channels + i) = T(1);
    pp.lin_w = ad::param(eye, "lin.w");
    pp.lin_b = ad::param(Tensor<T>({channels}), "lin.b");
    pp.gate_w = ad::param(Tensor<T>({channels, channels}), "gate.w");
    pp.gate_b = ad::param(Tensor<T>({channels}), "gate.b");
    return pp;
}

// (C,H,W) -> (C): per channel (mean z^p)^(1/p) on eps-clamped values.
template <typename T>
ad::Var<T> gem_pool(const ad::Var<T>& z, const ad::Var<T>& p, double eps = 1e-6) {
    if (z->value.rank() != 3) throw ShapeError("gem_pool: expected CHW input");
    if (p->value.numel() != 1) throw ShapeError("gem_pool: p must be scalar");
    if (p->value.at(0) < T(1)) throw ValueError("gem_pool: p must be >= 1");
    auto clamped = ad::clamp_min_scalar(z, eps);
    auto powered = ad::pow_elem(clamped, p);
    auto mean = ad::global_avg_pool(powered);
    return ad::pow_elem(mean, ad::pow_scalar(p, -1.0));
}

template <typename T>
ad::Var<T> da_pool(const ad::Var<T>& z, const DaPoolParams<T>& pp) {
    auto s = ad::add(ad::add(ad::global_max_pool(z), ad::global_avg_pool(z)), gem_pool(z, pp.p));
    auto h = ad::linear(ad::as_row(s), pp.lin_w, pp.lin_b);
    auto gate = ad::sigmoid(ad::linear(h, pp.gate_w, pp.gate_b));
    return ad::as_vec(ad::mul(gate, h));
}

// Plain pooling variants used by the ablation harness.
enum class PoolMode { Da, Gem, Avg, Max };

inline PoolMode pool_mode_from_string(const std::string& s) {
    if (s == "da") return PoolMode::Da;
    if (s == "gem") return PoolMode::Gem;
    if (s == "avg") return PoolMode::Avg;
    if (s == "max") return PoolMode::Max;
    throw ValueError("unknown pooling mode: " + s);
}

inline const char* pool_mode_name(PoolMode m) {
    switch (m) {
        case PoolMode::Da: return "da";
        case PoolMode::Gem: return "gem";
        case PoolMode::Avg: return "avg";
        case PoolMode::Max: return "max";
    }
    return "?";
}

template <typename T>
ad::Var<T> pool_features(const ad::Var<T>& z, const DaPoolParams<T>& pp, PoolMode mode) {
    switch (mode) {
        case PoolMode::Da: return da_pool(z, pp);
        case PoolMode::Gem: return gem_pool(z, pp.p);
        case PoolMode::Avg: return ad::global_avg_pool(z);
        case PoolMode::Max: return ad::global_max_pool(z);
    }
    throw ValueError("pool_features: bad mode");
}

}  // namespace clgt

#endif
