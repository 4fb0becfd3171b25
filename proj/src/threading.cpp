// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#include "clgt/threading.hpp"

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace clgt {

void init_threads_from_env() {
#ifdef _OPENMP
    const char* env = std::getenv("CLGT_THREADS");
    if (!env) return;
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
#endif
}

}  // namespace clgt
