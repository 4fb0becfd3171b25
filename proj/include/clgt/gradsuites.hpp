// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CLGT_GRADSUITES_HPP
#define CLGT_GRADSUITES_HPP

#include <string>
#include <vector>

namespace clgt {

struct GradSuiteResult {
    std::string module, name;
    double max_err = 0;
};

// Registers the built-in suites (idempotent).
void register_builtin_grad_suites();

// Runs every registered suite (optionally filtered by module) over `seeds`
// seeds, reporting the max relative error per suite.
std::vector<GradSuiteResult> run_grad_suites(const std::string& module_filter = "",
                                             int seeds = 3);

}  // namespace clgt

#endif
