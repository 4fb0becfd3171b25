// Copyright 2026 CLGT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff over a closed op catalog: matmul, conv2d
// (standard / depthwise / 1x1, any stride incl. the overlapping strided
// reduction), layer-norm, softmax-over-axis, sigmoid, gelu, elementwise
// add/sub/mul/div/pow/exp/log with broadcasting, scalar ops, global
// max/avg pooling, concat, reshape, transpose, broadcast. Everything else
// in the library is composed from these.
//
// Ops record parents only when an input requires grad; backward builds a
// topologically ordered tape from the root and accumulates adjoints into
// node.grad additively (caller zeroes explicitly).

#ifndef CLGT_AUTODIFF_HPP
#define CLGT_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "clgt/kernels.hpp"
#include "clgt/tensor.hpp"

namespace clgt::ad {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first accumulation; same shape as value
    bool requires_grad = false;
    const char* op = "leaf";
    std::string name;  // stable names for parameters
    std::vector<Var<T>> parents;
    // Accumulates into the parent adjoint buffers given this node's adjoint.
    std::function<void(const Tensor<T>& self_adj, std::vector<Tensor<T>*>& parent_adj)> backward_fn;

    bool is_leaf() const { return parents.empty(); }
    void ensure_grad() {
        if (grad.shape != value.shape) grad = Tensor<T>(value.shape);
    }
    void zero_grad() {
        if (!grad.data.empty()) grad.fill(T(0));
    }
};

template <typename T>
Var<T> constant(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return n;
}

template <typename T>
Var<T> leaf(Tensor<T> v, bool requires_grad, std::string name = "") {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return n;
}

template <typename T>
Var<T> param(Tensor<T> v, std::string name) {
    return leaf(std::move(v), true, std::move(name));
}

// Thread-local recording switch; inference paths disable it to keep
// forwards allocation-light.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {

template <typename T>
void check_input(const char* op, const Var<T>& v) {
    if (!v) throw ValueError(std::string(op) + ": null input");
    if (!v->value.finite()) throw ValueError(std::string(op) + ": non-finite input");
}

template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(const Tensor<T>&, std::vector<Tensor<T>*>&)> fn) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->op = op;
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    rg = rg && grad_mode();
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
    return n;
}

// numpy-style broadcast of two shapes (trailing alignment).
inline std::vector<int> broadcast_shapes(const char* op, const std::vector<int>& a,
                                         const std::vector<int>& b) {
    const size_t r = std::max(a.size(), b.size());
    std::vector<int> out(r);
    for (size_t i = 0; i < r; ++i) {
        const int da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const int db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) throw_shape_mismatch(op, a, b);
        out[i] = std::max(da, db);
    }
    return out;
}

inline std::vector<int64_t> contiguous_strides(const std::vector<int>& shape) {
    std::vector<int64_t> st(shape.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= shape[static_cast<size_t>(i)];
    }
    return st;
}

// Strides of `shape` aligned into `out` rank, 0 where broadcast.
inline std::vector<int64_t> broadcast_strides(const std::vector<int>& shape,
                                              const std::vector<int>& out) {
    auto own = contiguous_strides(shape);
    std::vector<int64_t> st(out.size(), 0);
    const size_t off = out.size() - shape.size();
    for (size_t i = 0; i < shape.size(); ++i)
        st[off + i] = (shape[i] == 1 && out[off + i] != 1) ? 0 : own[i];
    return st;
}

// Sums `g` (shaped `from`) down to `to` (broadcast-compatible smaller shape).
template <typename T>
Tensor<T> reduce_to_shape(const Tensor<T>& g, const std::vector<int>& to) {
    if (g.shape == to) return g;
    Tensor<T> out(to);
    const auto gst = contiguous_strides(g.shape);
    const auto ost = broadcast_strides(to, g.shape);
    const int64_t n = g.numel();
    const size_t r = g.shape.size();
    for (int64_t idx = 0; idx < n; ++idx) {
        int64_t rem = idx, oidx = 0;
        for (size_t d = 0; d < r; ++d) {
            const int64_t c = rem / gst[d];
            rem %= gst[d];
            oidx += c * ost[d];
        }
        out.at(oidx) += g.at(idx);
    }
    return out;
}

template <typename T, typename FwdF>
Tensor<T> broadcast_eval(const char* op, const Tensor<T>& a, const Tensor<T>& b, FwdF f) {
    if (a.shape == b.shape) {  // fast path
        Tensor<T> out(a.shape);
        const int64_t n = a.numel();
        const T* pa = a.ptr();
        const T* pb = b.ptr();
        T* po = out.ptr();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
        return out;
    }
    const auto oshape = broadcast_shapes(op, a.shape, b.shape);
    Tensor<T> out(oshape);
    const auto ost = contiguous_strides(oshape);
    const auto ast = broadcast_strides(a.shape, oshape);
    const auto bst = broadcast_strides(b.shape, oshape);
    const int64_t n = out.numel();
    const size_t r = oshape.size();
    for (int64_t idx = 0; idx < n; ++idx) {
        int64_t rem = idx, ai = 0, bi = 0;
        for (size_t d = 0; d < r; ++d) {
            const int64_t c = rem / ost[d];
            rem %= ost[d];
            ai += c * ast[d];
            bi += c * bst[d];
        }
        out.at(idx) = f(a.at(ai), b.at(bi));
    }
    return out;
}

// Evaluates fa(adj, a_val, b_val) over the broadcast index space and reduces
// into the shape of `a`. Used by binary backward paths.
template <typename T, typename F>
Tensor<T> broadcast_grad(const Tensor<T>& adj, const Tensor<T>& a, const Tensor<T>& b, F fa) {
    Tensor<T> full(adj.shape);
    const auto ost = contiguous_strides(adj.shape);
    const auto ast = broadcast_strides(a.shape, adj.shape);
    const auto bst = broadcast_strides(b.shape, adj.shape);
    const int64_t n = adj.numel();
    const size_t r = adj.shape.size();
    for (int64_t idx = 0; idx < n; ++idx) {
        int64_t rem = idx, ai = 0, bi = 0;
        for (size_t d = 0; d < r; ++d) {
            const int64_t c = rem / ost[d];
            rem %= ost[d];
            ai += c * ast[d];
            bi += c * bst[d];
        }
        full.at(idx) = fa(adj.at(idx), a.at(ai), b.at(bi));
    }
    return reduce_to_shape(full, a.shape);
}

template <typename T>
void acc(Tensor<T>* dst, const Tensor<T>& src) {
    if (!dst) return;
    kernels::axpy(T(1), src.ptr(), dst->ptr(), src.numel());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops (broadcasting), scalar ops, unary maps
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    detail::check_input("add", a);
    detail::check_input("add", b);
    auto out = detail::broadcast_eval<T>("add", a->value, b->value, [](T x, T y) { return x + y; });
    Tensor<T> av = a->value, bv = b->value;
    return detail::make_op<T>(
        "add", std::move(out), {a, b},
        [av, bv](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (pg[0]) detail::acc(pg[0], detail::reduce_to_shape(adj, av.shape));
            if (pg[1]) detail::acc(pg[1], detail::reduce_to_shape(adj, bv.shape));
        });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    detail::check_input("sub", a);
    detail::check_input("sub", b);
    auto out = detail::broadcast_eval<T>("sub", a->value, b->value, [](T x, T y) { return x - y; });
    Tensor<T> av = a->value, bv = b->value;
    return detail::make_op<T>(
        "sub", std::move(out), {a, b},
        [av, bv](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (pg[0]) detail::acc(pg[0], detail::reduce_to_shape(adj, av.shape));
            if (pg[1]) {
                Tensor<T> neg = adj;
                for (auto& v : neg.data) v = -v;
                detail::acc(pg[1], detail::reduce_to_shape(neg, bv.shape));
            }
        });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    detail::check_input("mul", a);
    detail::check_input("mul", b);
    auto out = detail::broadcast_eval<T>("mul", a->value, b->value, [](T x, T y) { return x * y; });
    Tensor<T> av = a->value, bv = b->value;
    return detail::make_op<T>(
        "mul", std::move(out), {a, b},
        [av, bv](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (pg[0])
                detail::acc(pg[0], detail::broadcast_grad<T>(adj, av, bv,
                                                             [](T g, T, T y) { return g * y; }));
            if (pg[1])
                detail::acc(pg[1], detail::broadcast_grad<T>(adj, bv, av,
                                                             [](T g, T, T x) { return g * x; }));
        });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
    detail::check_input("div", a);
    detail::check_input("div", b);
    auto out = detail::broadcast_eval<T>("div", a->value, b->value, [](T x, T y) { return x / y; });
    Tensor<T> av = a->value, bv = b->value;
    return detail::make_op<T>(
        "div", std::move(out), {a, b},
        [av, bv](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (pg[0])
                detail::acc(pg[0], detail::broadcast_grad<T>(adj, av, bv,
                                                             [](T g, T, T y) { return g / y; }));
            if (pg[1])
                detail::acc(pg[1],
                            detail::broadcast_grad<T>(
                                adj, bv, av, [](T g, T y, T x) { return -g * x / (y * y); }));
        });
}

// Elementwise a^b with broadcasting. Callers keep a > 0 when b is non-integer.
template <typename T>
Var<T> pow_elem(const Var<T>& a, const Var<T>& b) {
    detail::check_input("pow", a);
    detail::check_input("pow", b);
    auto out = detail::broadcast_eval<T>("pow", a->value, b->value,
                                         [](T x, T y) { return std::pow(x, y); });
    Tensor<T> av = a->value, bv = b->value;
    return detail::make_op<T>(
        "pow", std::move(out), {a, b},
        [av, bv](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (pg[0])
                detail::acc(pg[0], detail::broadcast_grad<T>(adj, av, bv, [](T g, T x, T y) {
                                return g * y * std::pow(x, y - T(1));
                            }));
            if (pg[1])
                detail::acc(pg[1], detail::broadcast_grad<T>(adj, bv, av, [](T g, T y, T x) {
                                return g * std::pow(x, y) * std::log(x);
                            }));
        });
}

namespace detail {

template <typename T, typename F, typename DF>
Var<T> unary_op(const char* name, const Var<T>& x, F f, DF df) {
    check_input(name, x);
    Tensor<T> out(x->value.shape);
    kernels::map_unary(x->value.ptr(), out.ptr(), out.numel(), f);
    Tensor<T> xv = x->value;
    return make_op<T>(name, std::move(out), {x},
                      [xv, df](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
                          if (!pg[0]) return;
                          Tensor<T> g(xv.shape);
                          const int64_t n = g.numel();
                          for (int64_t i = 0; i < n; ++i) g.at(i) = adj.at(i) * df(xv.at(i));
                          acc(pg[0], g);
                      });
}

}  // namespace detail

template <typename T>
Var<T> exp(const Var<T>& x) {
    return detail::unary_op<T>(
        "exp", x, [](T v) { return std::exp(v); }, [](T v) { return std::exp(v); });
}

template <typename T>
Var<T> log(const Var<T>& x) {
    return detail::unary_op<T>(
        "log", x, [](T v) { return std::log(v); }, [](T v) { return T(1) / v; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    return detail::unary_op<T>(
        "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T v) {
            const T s = T(1) / (T(1) + std::exp(-v));
            return s * (T(1) - s);
        });
}

// Exact erf-based GELU.
template <typename T>
Var<T> gelu(const Var<T>& x) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return detail::unary_op<T>(
        "gelu", x,
        [=](T v) { return static_cast<T>(0.5 * v * (1.0 + std::erf(v * inv_sqrt2))); },
        [=](T v) {
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * double(v) * double(v));
            return static_cast<T>(cdf + double(v) * pdf);
        });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, double c) {
    return detail::unary_op<T>(
        "add_scalar", x, [c](T v) { return v + static_cast<T>(c); }, [](T) { return T(1); });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& x, double c) {
    return detail::unary_op<T>(
        "mul_scalar", x, [c](T v) { return v * static_cast<T>(c); },
        [c](T) { return static_cast<T>(c); });
}

template <typename T>
Var<T> pow_scalar(const Var<T>& x, double c) {
    return detail::unary_op<T>(
        "pow_scalar", x, [c](T v) { return static_cast<T>(std::pow(double(v), c)); },
        [c](T v) { return static_cast<T>(c * std::pow(double(v), c - 1.0)); });
}

// max(x, c); subgradient passes where x > c.
template <typename T>
Var<T> clamp_min_scalar(const Var<T>& x, double c) {
    return detail::unary_op<T>(
        "clamp_min", x, [c](T v) { return v > static_cast<T>(c) ? v : static_cast<T>(c); },
        [c](T v) { return v > static_cast<T>(c) ? T(1) : T(0); });
}

template <typename T>
Var<T> neg(const Var<T>& x) {
    return mul_scalar(x, -1.0);
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    detail::check_input("matmul", a);
    detail::check_input("matmul", b);
    if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.dim(1) != b->value.dim(0))
        throw_shape_mismatch("matmul", a->value.shape, b->value.shape);
    const int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
    Tensor<T> out({m, n});
    kernels::matmul(a->value.ptr(), b->value.ptr(), out.ptr(), m, k, n);
    Tensor<T> av = a->value, bv = b->value;
    return detail::make_op<T>(
        "matmul", std::move(out), {a, b},
        [av, bv, m, k, n](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (pg[0]) {
                Tensor<T> da({m, k});
                kernels::matmul_nt(adj.ptr(), bv.ptr(), da.ptr(), m, n, k);
                detail::acc(pg[0], da);
            }
            if (pg[1]) {
                Tensor<T> db({k, n});
                kernels::matmul_tn(av.ptr(), adj.ptr(), db.ptr(), k, m, n);
                detail::acc(pg[1], db);
            }
        });
}

// ---------------------------------------------------------------------------
// conv2d (standard + depthwise)
// ---------------------------------------------------------------------------

// x: (Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout) or null Var.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
    detail::check_input("conv2d", x);
    detail::check_input("conv2d", w);
    if (b) detail::check_input("conv2d", b);
    if (x->value.rank() != 3 || w->value.rank() != 4 || x->value.dim(0) != w->value.dim(1))
        throw_shape_mismatch("conv2d", x->value.shape, w->value.shape);
    const int cin = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
    const int cout = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
    const int ho = kernels::conv_out_dim(h, kh, stride, pad);
    const int wo = kernels::conv_out_dim(wd, kw, stride, pad);
    const int cik = cin * kh * kw;
    const int64_t npix = static_cast<int64_t>(ho) * wo;

    auto col = std::make_shared<Tensor<T>>(std::vector<int>{cik, static_cast<int>(npix)});
    kernels::im2col(x->value.ptr(), col->ptr(), cin, h, wd, kh, kw, stride, pad, ho, wo);
    Tensor<T> out({cout, ho, wo});
    kernels::matmul(w->value.ptr(), col->ptr(), out.ptr(), cout, cik, static_cast<int>(npix));
    if (b) {
        if (b->value.numel() != cout) throw_shape_mismatch("conv2d bias", b->value.shape, {cout});
#pragma omp parallel for schedule(static)
        for (int co = 0; co < cout; ++co) {
            T* p = out.ptr() + co * npix;
            const T bv = b->value.at(co);
            for (int64_t i = 0; i < npix; ++i) p[i] += bv;
        }
    }
    Tensor<T> wv = w->value;
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return detail::make_op<T>(
        "conv2d", std::move(out), std::move(parents),
        [col, wv, cin, h, wd, cout, kh, kw, stride, pad, ho, wo, cik,
         npix](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (pg[0]) {
                Tensor<T> dcol({cik, static_cast<int>(npix)});
                kernels::matmul_tn(wv.ptr(), adj.ptr(), dcol.ptr(), cik, cout,
                                   static_cast<int>(npix));
                Tensor<T> dx({cin, h, wd});
                kernels::col2im_gather(dcol.ptr(), dx.ptr(), cin, h, wd, kh, kw, stride, pad, ho,
                                       wo);
                detail::acc(pg[0], dx);
            }
            if (pg[1]) {
                Tensor<T> dw({cout, cin, kh, kw});
                kernels::matmul_nt(adj.ptr(), col->ptr(), dw.ptr(), cout, static_cast<int>(npix),
                                   cik);
                detail::acc(pg[1], dw);
            }
            if (pg.size() > 2 && pg[2]) {
                Tensor<T> db({cout});
                for (int co = 0; co < cout; ++co) {
                    T s = 0;
                    const T* p = adj.ptr() + co * npix;
                    for (int64_t i = 0; i < npix; ++i) s += p[i];
                    db.at(co) = s;
                }
                detail::acc(pg[2], db);
            }
        });
}

// Depthwise: w: (C,kh,kw), groups == channels.
template <typename T>
Var<T> conv2d_depthwise(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
    detail::check_input("conv2d_depthwise", x);
    detail::check_input("conv2d_depthwise", w);
    if (b) detail::check_input("conv2d_depthwise", b);
    if (x->value.rank() != 3 || w->value.rank() != 3 || x->value.dim(0) != w->value.dim(0))
        throw_shape_mismatch("conv2d_depthwise", x->value.shape, w->value.shape);
    const int c = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
    const int kh = w->value.dim(1), kw = w->value.dim(2);
    const int ho = kernels::conv_out_dim(h, kh, stride, pad);
    const int wo = kernels::conv_out_dim(wd, kw, stride, pad);
    Tensor<T> out({c, ho, wo});
    kernels::conv2d_depthwise(x->value.ptr(), w->value.ptr(), b ? b->value.ptr() : nullptr,
                              out.ptr(), c, h, wd, kh, kw, stride, pad);
    Tensor<T> xv = x->value, wv = w->value;
    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return detail::make_op<T>(
        "conv2d_depthwise", std::move(out), std::move(parents),
        [xv, wv, c, h, wd, kh, kw, stride, pad, ho, wo](const Tensor<T>& adj,
                                                        std::vector<Tensor<T>*>& pg) {
            if (pg[0]) {
                Tensor<T> dx({c, h, wd});
                kernels::conv2d_depthwise_dx(adj.ptr(), wv.ptr(), dx.ptr(), c, h, wd, kh, kw,
                                             stride, pad, ho, wo);
                detail::acc(pg[0], dx);
            }
            if (pg[1]) {
                Tensor<T> dw({c, kh, kw});
                kernels::conv2d_depthwise_dw(adj.ptr(), xv.ptr(), dw.ptr(), c, h, wd, kh, kw,
                                             stride, pad, ho, wo);
                detail::acc(pg[1], dw);
            }
            if (pg.size() > 2 && pg[2]) {
                Tensor<T> db({c});
                const int64_t npix = static_cast<int64_t>(ho) * wo;
                for (int ci = 0; ci < c; ++ci) {
                    T s = 0;
                    const T* p = adj.ptr() + ci * npix;
                    for (int64_t i = 0; i < npix; ++i) s += p[i];
                    db.at(ci) = s;
                }
                detail::acc(pg[2], db);
            }
        });
}

// ---------------------------------------------------------------------------
// layer_norm / softmax over an axis
// ---------------------------------------------------------------------------

namespace detail {

struct AxisView {
    int64_t outer, len, inner;
};

inline AxisView axis_view(const std::vector<int>& shape, int axis) {
    if (axis < 0) axis += static_cast<int>(shape.size());
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    AxisView v{1, shape[static_cast<size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) v.outer *= shape[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) v.inner *= shape[i];
    return v;
}

}  // namespace detail

// Normalizes along `axis`; gamma/beta are length-axis vectors (affine).
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, int axis,
                  double eps = 1e-5) {
    detail::check_input("layer_norm", x);
    detail::check_input("layer_norm", gamma);
    detail::check_input("layer_norm", beta);
    const auto v = detail::axis_view(x->value.shape, axis);
    if (gamma->value.numel() != v.len || beta->value.numel() != v.len)
        throw_shape_mismatch("layer_norm affine", gamma->value.shape,
                             {static_cast<int>(v.len)});
    Tensor<T> out(x->value.shape);
    auto xhat = std::make_shared<Tensor<T>>(x->value.shape);
    auto istd = std::make_shared<Tensor<T>>(
        std::vector<int>{static_cast<int>(v.outer * v.inner)});
    const T* px = x->value.ptr();
    const T* pg = gamma->value.ptr();
    const T* pb = beta->value.ptr();
    T* po = out.ptr();
    T* ph = xhat->ptr();
    T* pi = istd->ptr();
#pragma omp parallel for schedule(static)
    for (int64_t o = 0; o < v.outer; ++o)
        for (int64_t in = 0; in < v.inner; ++in) {
            const int64_t base = o * v.len * v.inner + in;
            double mean = 0;
            for (int64_t a = 0; a < v.len; ++a) mean += px[base + a * v.inner];
            mean /= double(v.len);
            double var = 0;
            for (int64_t a = 0; a < v.len; ++a) {
                const double d = double(px[base + a * v.inner]) - mean;
                var += d * d;
            }
            var /= double(v.len);
            const double is = 1.0 / std::sqrt(var + eps);
            pi[o * v.inner + in] = static_cast<T>(is);
            for (int64_t a = 0; a < v.len; ++a) {
                const T hx = static_cast<T>((double(px[base + a * v.inner]) - mean) * is);
                ph[base + a * v.inner] = hx;
                po[base + a * v.inner] = pg[a] * hx + pb[a];
            }
        }
    Tensor<T> gv = gamma->value;
    return detail::make_op<T>(
        "layer_norm", std::move(out), {x, gamma, beta},
        [xhat, istd, gv, v](const Tensor<T>& adj, std::vector<Tensor<T>*>& pgr) {
            const T* ph = xhat->ptr();
            const T* pi = istd->ptr();
            const T* pa = adj.ptr();
            if (pgr[0]) {
                Tensor<T> dx(xhat->shape);
                T* pdx = dx.ptr();
                for (int64_t o = 0; o < v.outer; ++o)
                    for (int64_t in = 0; in < v.inner; ++in) {
                        const int64_t base = o * v.len * v.inner + in;
                        double m1 = 0, m2 = 0;
                        for (int64_t a = 0; a < v.len; ++a) {
                            const double dg = double(pa[base + a * v.inner]) * double(gv.at(a));
                            m1 += dg;
                            m2 += dg * double(ph[base + a * v.inner]);
                        }
                        m1 /= double(v.len);
                        m2 /= double(v.len);
                        const double is = pi[o * v.inner + in];
                        for (int64_t a = 0; a < v.len; ++a) {
                            const double dg = double(pa[base + a * v.inner]) * double(gv.at(a));
                            pdx[base + a * v.inner] = static_cast<T>(
                                is * (dg - m1 - double(ph[base + a * v.inner]) * m2));
                        }
                    }
                detail::acc(pgr[0], dx);
            }
            if (pgr[1] || pgr[2]) {
                Tensor<T> dgm({static_cast<int>(v.len)});
                Tensor<T> dbt({static_cast<int>(v.len)});
                for (int64_t o = 0; o < v.outer; ++o)
                    for (int64_t in = 0; in < v.inner; ++in) {
                        const int64_t base = o * v.len * v.inner + in;
                        for (int64_t a = 0; a < v.len; ++a) {
                            dgm.at(a) += pa[base + a * v.inner] * ph[base + a * v.inner];
                            dbt.at(a) += pa[base + a * v.inner];
                        }
                    }
                if (pgr[1]) detail::acc(pgr[1], dgm);
                if (pgr[2]) detail::acc(pgr[2], dbt);
            }
        });
}

// Numerically stabilized softmax along `axis`.
template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
    detail::check_input("softmax", x);
    const auto v = detail::axis_view(x->value.shape, axis);
    Tensor<T> out(x->value.shape);
    const T* px = x->value.ptr();
    T* po = out.ptr();
#pragma omp parallel for schedule(static)
    for (int64_t o = 0; o < v.outer; ++o)
        for (int64_t in = 0; in < v.inner; ++in) {
            const int64_t base = o * v.len * v.inner + in;
            T mx = px[base];
            for (int64_t a = 1; a < v.len; ++a) mx = std::max(mx, px[base + a * v.inner]);
            double sum = 0;
            for (int64_t a = 0; a < v.len; ++a) {
                const double e = std::exp(double(px[base + a * v.inner]) - double(mx));
                po[base + a * v.inner] = static_cast<T>(e);
                sum += e;
            }
            const double inv = 1.0 / sum;
            for (int64_t a = 0; a < v.len; ++a)
                po[base + a * v.inner] = static_cast<T>(double(po[base + a * v.inner]) * inv);
        }
    auto yv = std::make_shared<Tensor<T>>(out);
    return detail::make_op<T>(
        "softmax", std::move(out), {x},
        [yv, v](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (!pg[0]) return;
            Tensor<T> dx(yv->shape);
            const T* py = yv->ptr();
            const T* pa = adj.ptr();
            T* pd = dx.ptr();
            for (int64_t o = 0; o < v.outer; ++o)
                for (int64_t in = 0; in < v.inner; ++in) {
                    const int64_t base = o * v.len * v.inner + in;
                    double dot = 0;
                    for (int64_t a = 0; a < v.len; ++a)
                        dot += double(pa[base + a * v.inner]) * double(py[base + a * v.inner]);
                    for (int64_t a = 0; a < v.len; ++a)
                        pd[base + a * v.inner] = static_cast<T>(
                            double(py[base + a * v.inner]) *
                            (double(pa[base + a * v.inner]) - dot));
                }
            detail::acc(pg[0], dx);
        });
}

// ---------------------------------------------------------------------------
// Global pooling over (C,H,W)
// ---------------------------------------------------------------------------

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    detail::check_input("global_avg_pool", x);
    if (x->value.rank() != 3) throw ShapeError("global_avg_pool: expected CHW");
    const int c = x->value.dim(0);
    const int64_t plane = static_cast<int64_t>(x->value.dim(1)) * x->value.dim(2);
    Tensor<T> out({c});
    for (int ci = 0; ci < c; ++ci) {
        double s = 0;
        const T* p = x->value.ptr() + ci * plane;
        for (int64_t i = 0; i < plane; ++i) s += p[i];
        out.at(ci) = static_cast<T>(s / double(plane));
    }
    auto xshape = x->value.shape;
    return detail::make_op<T>("global_avg_pool", std::move(out), {x},
                              [xshape, c, plane](const Tensor<T>& adj,
                                                 std::vector<Tensor<T>*>& pg) {
                                  if (!pg[0]) return;
                                  Tensor<T> dx(xshape);
                                  for (int ci = 0; ci < c; ++ci) {
                                      const T g = static_cast<T>(double(adj.at(ci)) / double(plane));
                                      T* p = dx.ptr() + ci * plane;
                                      for (int64_t i = 0; i < plane; ++i) p[i] = g;
                                  }
                                  detail::acc(pg[0], dx);
                              });
}

// Ties break toward the first (lowest linear) index.
template <typename T>
Var<T> global_max_pool(const Var<T>& x) {
    detail::check_input("global_max_pool", x);
    if (x->value.rank() != 3) throw ShapeError("global_max_pool: expected CHW");
    const int c = x->value.dim(0);
    const int64_t plane = static_cast<int64_t>(x->value.dim(1)) * x->value.dim(2);
    Tensor<T> out({c});
    auto argmax = std::make_shared<std::vector<int64_t>>(c);
    for (int ci = 0; ci < c; ++ci) {
        const T* p = x->value.ptr() + ci * plane;
        int64_t best = 0;
        for (int64_t i = 1; i < plane; ++i)
            if (p[i] > p[best]) best = i;
        (*argmax)[static_cast<size_t>(ci)] = best;
        out.at(ci) = p[best];
    }
    auto xshape = x->value.shape;
    return detail::make_op<T>(
        "global_max_pool", std::move(out), {x},
        [xshape, c, plane, argmax](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            if (!pg[0]) return;
            Tensor<T> dx(xshape);
            for (int ci = 0; ci < c; ++ci)
                dx.at(ci * plane + (*argmax)[static_cast<size_t>(ci)]) = adj.at(ci);
            detail::acc(pg[0], dx);
        });
}

// ---------------------------------------------------------------------------
// Shape ops: concat / reshape / transpose / broadcast_to
// ---------------------------------------------------------------------------

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    for (const auto& p : parts) detail::check_input("concat", p);
    const auto& ref = parts[0]->value.shape;
    if (axis < 0) axis += static_cast<int>(ref.size());
    std::vector<int> oshape = ref;
    int total = 0;
    for (const auto& p : parts) {
        const auto& s = p->value.shape;
        if (s.size() != ref.size()) throw_shape_mismatch("concat", ref, s);
        for (size_t d = 0; d < s.size(); ++d)
            if (static_cast<int>(d) != axis && s[d] != ref[d])
                throw_shape_mismatch("concat", ref, s);
        total += s[static_cast<size_t>(axis)];
    }
    oshape[static_cast<size_t>(axis)] = total;
    Tensor<T> out(oshape);
    const auto v = detail::axis_view(oshape, axis);
    std::vector<int> lens;
    int64_t off = 0;
    for (const auto& p : parts) {
        const int len = p->value.shape[static_cast<size_t>(axis)];
        lens.push_back(len);
        const T* src = p->value.ptr();
        for (int64_t o = 0; o < v.outer; ++o)
            std::memcpy(out.ptr() + (o * total + off) * v.inner,
                        src + o * len * v.inner, sizeof(T) * static_cast<size_t>(len) * v.inner);
        off += len;
    }
    return detail::make_op<T>(
        "concat", std::move(out), parts,
        [v, lens, total](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
            int64_t off2 = 0;
            for (size_t i = 0; i < lens.size(); ++i) {
                const int len = lens[i];
                if (pg[i]) {
                    for (int64_t o = 0; o < v.outer; ++o) {
                        const T* src = adj.ptr() + (o * total + off2) * v.inner;
                        T* dst = pg[i]->ptr() + o * len * v.inner;
                        for (int64_t j = 0; j < len * v.inner; ++j) dst[j] += src[j];
                    }
                }
                off2 += len;
            }
        });
}

template <typename T>
Var<T> reshape(const Var<T>& x, std::vector<int> shape) {
    detail::check_input("reshape", x);
    if (numel_of(shape) != x->value.numel())
        throw_shape_mismatch("reshape", x->value.shape, shape);
    Tensor<T> out(shape, x->value.data);
    auto xshape = x->value.shape;
    return detail::make_op<T>("reshape", std::move(out), {x},
                              [xshape](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
                                  if (!pg[0]) return;
                                  Tensor<T> g(xshape, adj.data);
                                  detail::acc(pg[0], g);
                              });
}

namespace detail {

template <typename T>
Tensor<T> permute_copy(const Tensor<T>& x, const std::vector<int>& perm) {
    const size_t r = x.shape.size();
    std::vector<int> oshape(r);
    for (size_t i = 0; i < r; ++i) oshape[i] = x.shape[static_cast<size_t>(perm[i])];
    Tensor<T> out(oshape);
    const auto xst = contiguous_strides(x.shape);
    const auto ost = contiguous_strides(oshape);
    const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
    for (int64_t idx = 0; idx < n; ++idx) {
        int64_t rem = idx, src = 0;
        for (size_t d = 0; d < r; ++d) {
            const int64_t c = rem / ost[d];
            rem %= ost[d];
            src += c * xst[static_cast<size_t>(perm[d])];
        }
        out.at(idx) = x.at(src);
    }
    return out;
}

}  // namespace detail

template <typename T>
Var<T> transpose(const Var<T>& x, std::vector<int> perm = {}) {
    detail::check_input("transpose", x);
    const size_t r = x->value.shape.size();
    if (perm.empty()) {
        if (r != 2) throw ShapeError("transpose: default perm needs rank 2");
        perm = {1, 0};
    }
    if (perm.size() != r) throw ShapeError("transpose: bad perm size");
    Tensor<T> out = detail::permute_copy(x->value, perm);
    std::vector<int> inv(r);
    for (size_t i = 0; i < r; ++i) inv[static_cast<size_t>(perm[i])] = static_cast<int>(i);
    return detail::make_op<T>("transpose", std::move(out), {x},
                              [inv](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
                                  if (!pg[0]) return;
                                  detail::acc(pg[0], detail::permute_copy(adj, inv));
                              });
}

template <typename T>
Var<T> broadcast_to(const Var<T>& x, std::vector<int> shape) {
    detail::check_input("broadcast_to", x);
    detail::broadcast_shapes("broadcast_to", x->value.shape, shape);
    Tensor<T> out(shape);
    const auto ost = detail::contiguous_strides(shape);
    const auto xst = detail::broadcast_strides(x->value.shape, shape);
    const int64_t n = out.numel();
    const size_t r = shape.size();
    for (int64_t idx = 0; idx < n; ++idx) {
        int64_t rem = idx, src = 0;
        for (size_t d = 0; d < r; ++d) {
            const int64_t c = rem / ost[d];
            rem %= ost[d];
            src += c * xst[d];
        }
        out.at(idx) = x->value.at(src);
    }
    auto xshape = x->value.shape;
    return detail::make_op<T>("broadcast_to", std::move(out), {x},
                              [xshape](const Tensor<T>& adj, std::vector<Tensor<T>*>& pg) {
                                  if (!pg[0]) return;
                                  detail::acc(pg[0], detail::reduce_to_shape(adj, xshape));
                              });
}

// ---------------------------------------------------------------------------
// Tape + backward
// ---------------------------------------------------------------------------

template <typename T>
class Tape {
public:
    // Topological order of the subgraph reachable from root (parents first).
    static Tape build(const Var<T>& root) {
        Tape t;
        std::unordered_set<Node<T>*> seen;
        std::vector<std::pair<Var<T>, size_t>> stack;  // node, next-parent cursor
        if (root) stack.push_back({root, 0});
        while (!stack.empty()) {
            auto& [node, cursor] = stack.back();
            if (seen.count(node.get())) {
                stack.pop_back();
                continue;
            }
            if (cursor < node->parents.size()) {
                auto child = node->parents[cursor++];
                if (!seen.count(child.get())) stack.push_back({child, 0});
            } else {
                seen.insert(node.get());
                t.order_.push_back(node);
                stack.pop_back();
            }
        }
        return t;
    }

    const std::vector<Var<T>>& entries() const { return order_; }

private:
    std::vector<Var<T>> order_;
};

// Seeds d(root)/d(root) = 1 and accumulates adjoints into .grad of every
// requires_grad node reached. Adjoint buffers are per-call, so repeated
// backward calls accumulate additively.
template <typename T>
void backward(const Tape<T>& tape, const Var<T>& root) {
    if (!root || root->value.numel() != 1)
        throw ValueError("backward: root must be a scalar tensor");
    std::unordered_map<Node<T>*, Tensor<T>> adj;
    adj.emplace(root.get(), Tensor<T>::full(root->value.shape, T(1)));
    const auto& order = tape.entries();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = it->get();
        auto found = adj.find(node);
        if (found == adj.end() || !node->backward_fn) continue;
        std::vector<Tensor<T>*> pg(node->parents.size(), nullptr);
        for (size_t i = 0; i < node->parents.size(); ++i) {
            Node<T>* p = node->parents[i].get();
            if (!p->requires_grad) continue;
            auto [slot, inserted] = adj.try_emplace(p, Tensor<T>());
            if (inserted) slot->second = Tensor<T>(p->value.shape);
            pg[i] = &slot->second;
        }
        node->backward_fn(found->second, pg);
    }
    for (const auto& node : order) {
        if (!node->requires_grad) continue;
        auto found = adj.find(node.get());
        if (found == adj.end()) continue;
        node->ensure_grad();
        kernels::axpy(T(1), found->second.ptr(), node->grad.ptr(), node->grad.numel());
    }
}

template <typename T>
void backward(const Var<T>& root) {
    backward(Tape<T>::build(root), root);
}

}  // namespace clgt::ad

#endif
