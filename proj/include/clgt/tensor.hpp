// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CLGT_TENSOR_HPP
#define CLGT_TENSOR_HPP

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <type_traits>
#include <vector>

#include "clgt/common.hpp"
#include "clgt/rng.hpp"

namespace clgt {

enum class DType : uint8_t { F32 = 0, F64 = 1 };

// Dense row-major value tensor. The autodiff layer wraps these in graph
// nodes; everything below that level works on plain Tensor<T>.
template <typename T>
struct Tensor {
    static_assert(std::is_floating_point_v<T>);

    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {
        for (int d : shape)
            if (d <= 0) throw ShapeError("Tensor: nonpositive dim in " + shape_str(shape));
    }
    Tensor(std::vector<int> s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (numel_of(shape) != static_cast<int64_t>(data.size()))
            throw ShapeError("Tensor: data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }

    static constexpr DType dtype() { return sizeof(T) == 4 ? DType::F32 : DType::F64; }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    T at(int64_t i) const { return data[static_cast<size_t>(i)]; }

    bool finite() const { return all_finite(data.data(), numel()); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, T v) {
        Tensor t(std::move(s));
        t.fill(v);
        return t;
    }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    static Tensor randn(std::vector<int> s, Rng& rng, T stddev = T(1)) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    static Tensor rand_uniform(std::vector<int> s, Rng& rng, T lo = T(0), T hi = T(1)) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape == b.shape;
}

}  // namespace clgt

#endif
