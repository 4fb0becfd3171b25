// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Counter-based seeded random streams. SplitMix64 state transitions with
// hash-style stream splitting, so any (seed, tag...) pair addresses an
// independent deterministic stream regardless of platform or thread layout.

#ifndef CLGT_RNG_HPP
#define CLGT_RNG_HPP

#include <cmath>
#include <cstdint>

namespace clgt {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Folds a tag into a seed, producing the seed of a child stream.
inline uint64_t rng_fold(uint64_t seed, uint64_t tag) {
    uint64_t s = seed ^ (tag + 0x9E3779B97F4A7C15ull + (seed << 6) + (seed >> 2));
    return splitmix64(s);
}

inline uint64_t rng_fold(uint64_t seed, uint64_t a, uint64_t b) {
    return rng_fold(rng_fold(seed, a), b);
}

inline uint64_t rng_fold(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
    return rng_fold(rng_fold(rng_fold(seed, a), b), c);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; one fresh pair of uniforms per draw.
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;        // [0, 1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Rng split(uint64_t tag) const { return Rng(rng_fold(state_, tag)); }

private:
    uint64_t state_;
};

}  // namespace clgt

#endif
