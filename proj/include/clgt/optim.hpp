// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CLGT_OPTIM_HPP
#define CLGT_OPTIM_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "clgt/autodiff.hpp"

namespace clgt {

struct AdamWConfig {
    double lr = 0.5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam. Moment buffers are keyed by parameter name;
// the step counter increases by exactly one per step() call.
template <typename T>
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    int64_t step_count() const { return t_; }

    void step(const std::vector<std::pair<std::string, ad::Var<T>>>& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (const auto& [name, p] : params) {
            if (p->grad.shape != p->value.shape)
                throw ValueError("adamw: missing gradient for parameter " + name);
            if (!p->grad.finite())
                throw ValueError("adamw: non-finite gradient for parameter " + name);
            auto& st = state_[name];
            if (st.m.shape != p->value.shape) {
                st.m = Tensor<T>(p->value.shape);
                st.v = Tensor<T>(p->value.shape);
            }
            const int64_t n = p->value.numel();
            for (int64_t i = 0; i < n; ++i) {
                const double g = p->grad.at(i);
                const double m = cfg_.beta1 * st.m.at(i) + (1.0 - cfg_.beta1) * g;
                const double v = cfg_.beta2 * st.v.at(i) + (1.0 - cfg_.beta2) * g * g;
                st.m.at(i) = static_cast<T>(m);
                st.v.at(i) = static_cast<T>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                const double w = p->value.at(i);
                p->value.at(i) = static_cast<T>(
                    w - cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w));
            }
        }
    }

private:
    struct Moments {
        Tensor<T> m, v;
    };
    AdamWConfig cfg_;
    std::map<std::string, Moments> state_;
    int64_t t_ = 0;
};

template <typename T>
void zero_grads(const std::vector<std::pair<std::string, ad::Var<T>>>& params) {
    for (auto& [name, p] : params) p->zero_grad();
}

}  // namespace clgt

#endif
