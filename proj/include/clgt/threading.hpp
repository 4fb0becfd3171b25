// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CLGT_THREADING_HPP
#define CLGT_THREADING_HPP

namespace clgt {

// Applies the CLGT_THREADS env var (0 or unset = runtime default).
void init_threads_from_env();

}  // namespace clgt

#endif
