// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CLGT_COMMON_HPP
#define CLGT_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clgt {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ValueError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

[[noreturn]] inline void throw_shape_mismatch(const char* where, const std::vector<int>& a,
                                              const std::vector<int>& b) {
    throw ShapeError(std::string(where) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

inline int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

template <typename T>
bool all_finite(const T* p, int64_t n) {
    for (int64_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(p[i]))) return false;
    return true;
}

}  // namespace clgt

#endif
