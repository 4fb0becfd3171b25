// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient checking at 64-bit. The numeric side
// re-evaluates the user-supplied graph builder, so it stays independent of
// the backward implementation it validates.

#ifndef CLGT_GRADCHECK_HPP
#define CLGT_GRADCHECK_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "clgt/autodiff.hpp"

namespace clgt {

// Builds a scalar graph from leaf variables (the builder must be pure).
using GraphBuilder =
    std::function<ad::Var<double>(const std::vector<ad::Var<double>>&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    int64_t coords_checked = 0;
};

inline GradCheckResult grad_check_inputs(const GraphBuilder& builder,
                                         std::vector<Tensor<double>> inputs,
                                         double fd_step = 1e-5) {
    auto eval = [&](const std::vector<Tensor<double>>& vals) {
        std::vector<ad::Var<double>> leaves;
        leaves.reserve(vals.size());
        for (const auto& v : vals) leaves.push_back(ad::leaf(v, false));
        auto root = builder(leaves);
        if (!root || root->value.numel() != 1)
            throw ValueError("grad_check: graph output must be scalar");
        return root->value.at(0);
    };

    std::vector<ad::Var<double>> leaves;
    leaves.reserve(inputs.size());
    for (const auto& v : inputs) leaves.push_back(ad::leaf(v, true));
    auto root = builder(leaves);
    if (!root || root->value.numel() != 1)
        throw ValueError("grad_check: graph output must be scalar");
    ad::backward(root);

    GradCheckResult res;
    for (size_t li = 0; li < inputs.size(); ++li) {
        const int64_t n = inputs[li].numel();
        for (int64_t i = 0; i < n; ++i) {
            const double keep = inputs[li].at(i);
            inputs[li].at(i) = keep + fd_step;
            const double fp = eval(inputs);
            inputs[li].at(i) = keep - fd_step;
            const double fm = eval(inputs);
            inputs[li].at(i) = keep;
            const double numeric = (fp - fm) / (2.0 * fd_step);
            const double analytic =
                leaves[li]->grad.data.empty() ? 0.0 : leaves[li]->grad.at(i);
            const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            res.max_rel_error = std::max(res.max_rel_error,
                                         std::abs(analytic - numeric) / denom);
            ++res.coords_checked;
        }
    }
    return res;
}

// Seeded-random inputs of the given shapes.
inline GradCheckResult grad_check(const GraphBuilder& builder,
                                  const std::vector<std::vector<int>>& shapes, uint64_t seed,
                                  double fd_step = 1e-5) {
    Rng rng(rng_fold(seed, 0x67636864));
    std::vector<Tensor<double>> inputs;
    inputs.reserve(shapes.size());
    for (const auto& s : shapes) inputs.push_back(Tensor<double>::randn(s, rng, 0.5));
    return grad_check_inputs(builder, std::move(inputs), fd_step);
}

// Named gradient suites, aggregated by the CLI `gradcheck` command and the
// acceptance harness. Each suite returns its max relative error.
class GradSuiteRegistry {
public:
    using SuiteFn = std::function<double(uint64_t seed)>;

    static GradSuiteRegistry& instance() {
        static GradSuiteRegistry r;
        return r;
    }

    void add(const std::string& module, const std::string& name, SuiteFn fn) {
        suites_.push_back({module, name, std::move(fn)});
    }

    struct Entry {
        std::string module, name;
        SuiteFn fn;
    };

    const std::vector<Entry>& suites() const { return suites_; }

private:
    std::vector<Entry> suites_;
};

}  // namespace clgt

#endif
