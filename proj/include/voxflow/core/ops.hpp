#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "voxflow/core/tape.hpp"

// Differentiable op builders. Each returns a new tape node; backward closures
// capture node ids and small POD config, reading tensors back off the tape.
namespace voxflow {

namespace detail {

template <class S>
inline void axpy(S* y, S a, const S* x, int n) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class S>
inline S dot(const S* a, const S* b, int n) {
    S s = 0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Accumulate g into parent, reducing over broadcast dimensions.
// Supported parent shapes: same as g, [1 x C] (column sums), [1 x 1] (total).
template <class S>
inline void accum_reduced(Tape<S>& t, int parent, const Tensor<S>& g) {
    if (!t.node_needs(parent)) return;
    Tensor<S>& buf = t.grad_buf(parent);
    if (buf.shape == g.shape) {
        for (int64_t i = 0; i < g.numel(); ++i) buf.v[i] += g.v[i];
    } else if (buf.numel() == 1) {
        S s = 0;
        for (S x : g.v) s += x;
        buf.v[0] += s;
    } else if (buf.rows() == 1 && buf.cols() == g.cols()) {
        int T = g.rows(), C = g.cols();
        for (int r = 0; r < T; ++r) axpy(buf.v.data(), S(1), g.row(r), C);
    } else {
        throw Error("accum_reduced: incompatible shapes");
    }
}

enum class Bcast { Same, Row, Scalar };

template <class S>
inline Bcast bcast_kind(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape == b.shape) return Bcast::Same;
    if (b.numel() == 1) return Bcast::Scalar;
    if (b.rows() == 1 && b.cols() == a.cols() && a.rank() == 2 && b.rank() == 2) return Bcast::Row;
    throw Error(std::string(op) + ": incompatible shapes " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace detail

// ---- elementwise binary -------------------------------------------------

template <class S>
Var add(Tape<S>& t, Var a, Var b) {
    const Tensor<S>& A = t.val(a);
    const Tensor<S>& B = t.val(b);
    auto kind = detail::bcast_kind(A, B, "add");
    Tensor<S> out = A;
    if (kind == detail::Bcast::Same) {
        for (int64_t i = 0; i < out.numel(); ++i) out.v[i] += B.v[i];
    } else if (kind == detail::Bcast::Scalar) {
        for (auto& x : out.v) x += B.v[0];
    } else {
        int T = A.rows(), C = A.cols();
        for (int r = 0; r < T; ++r) detail::axpy(out.row(r), S(1), B.v.data(), C);
    }
    return t.make(std::move(out), {a.id, b.id}, [a, b](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        detail::accum_reduced(tt, a.id, g);
        detail::accum_reduced(tt, b.id, g);
    });
}

template <class S>
Var sub(Tape<S>& t, Var a, Var b) {
    const Tensor<S>& A = t.val(a);
    const Tensor<S>& B = t.val(b);
    auto kind = detail::bcast_kind(A, B, "sub");
    Tensor<S> out = A;
    if (kind == detail::Bcast::Same) {
        for (int64_t i = 0; i < out.numel(); ++i) out.v[i] -= B.v[i];
    } else if (kind == detail::Bcast::Scalar) {
        for (auto& x : out.v) x -= B.v[0];
    } else {
        int T = A.rows(), C = A.cols();
        for (int r = 0; r < T; ++r) detail::axpy(out.row(r), S(-1), B.v.data(), C);
    }
    return t.make(std::move(out), {a.id, b.id}, [a, b](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        detail::accum_reduced(tt, a.id, g);
        Tensor<S> neg = g;
        for (auto& x : neg.v) x = -x;
        detail::accum_reduced(tt, b.id, neg);
    });
}

template <class S>
Var mul(Tape<S>& t, Var a, Var b) {
    const Tensor<S>& A = t.val(a);
    const Tensor<S>& B = t.val(b);
    auto kind = detail::bcast_kind(A, B, "mul");
    Tensor<S> out = A;
    if (kind == detail::Bcast::Same) {
        for (int64_t i = 0; i < out.numel(); ++i) out.v[i] *= B.v[i];
    } else if (kind == detail::Bcast::Scalar) {
        for (auto& x : out.v) x *= B.v[0];
    } else {
        int T = A.rows(), C = A.cols();
        for (int r = 0; r < T; ++r)
            for (int c = 0; c < C; ++c) out.at(r, c) *= B.v[c];
    }
    return t.make(std::move(out), {a.id, b.id}, [a, b, kind](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& A2 = tt.node_val(a.id);
        const Tensor<S>& B2 = tt.node_val(b.id);
        if (tt.node_needs(a.id)) {
            Tensor<S> ga = g;
            if (kind == detail::Bcast::Same) {
                for (int64_t i = 0; i < ga.numel(); ++i) ga.v[i] *= B2.v[i];
            } else if (kind == detail::Bcast::Scalar) {
                for (auto& x : ga.v) x *= B2.v[0];
            } else {
                int T = ga.rows(), C = ga.cols();
                for (int r = 0; r < T; ++r)
                    for (int c = 0; c < C; ++c) ga.at(r, c) *= B2.v[c];
            }
            detail::accum_reduced(tt, a.id, ga);
        }
        if (tt.node_needs(b.id)) {
            Tensor<S> gb = g;
            for (int64_t i = 0; i < gb.numel(); ++i) gb.v[i] *= A2.v[i];
            detail::accum_reduced(tt, b.id, gb);
        }
    });
}

// ---- elementwise unary --------------------------------------------------

template <class S, class Fwd, class Bwd>
Var unary_op(Tape<S>& t, Var a, Fwd fwd, Bwd bwd_factor_from_xy) {
    const Tensor<S>& A = t.val(a);
    Tensor<S> out = A;
    for (auto& x : out.v) x = fwd(x);
    return t.make(std::move(out), {a.id}, [a, bwd_factor_from_xy](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& x = tt.node_val(a.id);
        const Tensor<S>& y = tt.node_val(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (int64_t i = 0; i < g.numel(); ++i) buf.v[i] += g.v[i] * bwd_factor_from_xy(x.v[i], y.v[i]);
    });
}

template <class S>
Var neg(Tape<S>& t, Var a) {
    return unary_op(t, a, [](S x) { return -x; }, [](S, S) { return S(-1); });
}

template <class S>
Var scale(Tape<S>& t, Var a, double c) {
    S cc = static_cast<S>(c);
    return unary_op(t, a, [cc](S x) { return cc * x; }, [cc](S, S) { return cc; });
}

template <class S>
Var add_const(Tape<S>& t, Var a, double c) {
    S cc = static_cast<S>(c);
    return unary_op(t, a, [cc](S x) { return x + cc; }, [](S, S) { return S(1); });
}

template <class S>
Var tanh_(Tape<S>& t, Var a) {
    return unary_op(t, a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <class S>
Var sigmoid_(Tape<S>& t, Var a) {
    return unary_op(t, a, [](S x) { return S(1) / (S(1) + std::exp(-x)); },
                    [](S, S y) { return y * (S(1) - y); });
}

template <class S>
Var exp_(Tape<S>& t, Var a) {
    return unary_op(t, a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <class S>
Var leaky_relu(Tape<S>& t, Var a, double slope = 0.1) {
    S s = static_cast<S>(slope);
    return unary_op(t, a, [s](S x) { return x > 0 ? x : s * x; },
                    [s](S x, S) { return x > 0 ? S(1) : s; });
}

template <class S>
Var relu(Tape<S>& t, Var a) {
    return leaky_relu(t, a, 0.0);
}

// log(max(x, floor)); gradient is zero in the clamped region.
template <class S>
Var log_clamp(Tape<S>& t, Var a, double floor) {
    S f = static_cast<S>(floor);
    return unary_op(t, a, [f](S x) { return std::log(std::max(x, f)); },
                    [f](S x, S) { return x > f ? S(1) / x : S(0); });
}

template <class S>
Var clamp(Tape<S>& t, Var a, double lo, double hi) {
    S l = static_cast<S>(lo), h = static_cast<S>(hi);
    return unary_op(t, a, [l, h](S x) { return std::min(std::max(x, l), h); },
                    [l, h](S x, S) { return (x >= l && x <= h) ? S(1) : S(0); });
}

// sqrt(max(x, 0) + eps): used for pooled standard deviations.
template <class S>
Var sqrt_floor(Tape<S>& t, Var a, double eps) {
    S e = static_cast<S>(eps);
    return unary_op(t, a, [e](S x) { return std::sqrt(std::max(x, S(0)) + e); },
                    [](S x, S y) { return x >= 0 ? S(0.5) / y : S(0); });
}

template <class S>
Var abs_(Tape<S>& t, Var a) {
    return unary_op(t, a, [](S x) { return std::abs(x); },
                    [](S x, S) { return x > 0 ? S(1) : (x < 0 ? S(-1) : S(0)); });
}

template <class S>
Var square(Tape<S>& t, Var a) {
    return unary_op(t, a, [](S x) { return x * x; }, [](S x, S) { return 2 * x; });
}

// Gradient reversal: identity forward, -lambda * g backward.
template <class S>
Var gradient_reversal(Tape<S>& t, Var a, double lambda) {
    Tensor<S> out = t.val(a);
    return t.make(std::move(out), {a.id}, [a, lambda](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S> ga = g;
        for (auto& x : ga.v) x *= static_cast<S>(-lambda);
        detail::accum_reduced(tt, a.id, ga);
    });
}

template <class S>
Var detach(Tape<S>& t, Var a) {
    return t.constant(t.val(a));
}

// ---- reductions ---------------------------------------------------------

template <class S>
Var sum_all(Tape<S>& t, Var a) {
    const Tensor<S>& A = t.val(a);
    S s = 0;
    for (S x : A.v) s += x;
    return t.make(Tensor<S>::scalar(s), {a.id}, [a](Tape<S>& tt, int self) {
        S g = tt.node_grad(self).v[0];
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (auto& x : buf.v) x += g;
    });
}

template <class S>
Var mean_all(Tape<S>& t, Var a) {
    const Tensor<S>& A = t.val(a);
    if (A.numel() == 0) throw Error("mean_all: empty tensor");
    double inv = 1.0 / static_cast<double>(A.numel());
    S s = 0;
    for (S x : A.v) s += x;
    return t.make(Tensor<S>::scalar(static_cast<S>(s * inv)), {a.id}, [a, inv](Tape<S>& tt, int self) {
        S g = static_cast<S>(tt.node_grad(self).v[0] * inv);
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (auto& x : buf.v) x += g;
    });
}

// Mean over rows -> [1 x C].
template <class S>
Var col_mean(Tape<S>& t, Var a) {
    const Tensor<S>& A = t.val(a);
    int T = A.rows(), C = A.cols();
    if (T == 0) throw Error("col_mean: empty tensor");
    Tensor<S> out({1, C});
    for (int r = 0; r < T; ++r) detail::axpy(out.v.data(), S(1) / S(T), A.row(r), C);
    return t.make(std::move(out), {a.id}, [a, T, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (int r = 0; r < T; ++r) detail::axpy(buf.row(r), S(1) / S(T), g.v.data(), C);
    });
}

// ---- matmul -------------------------------------------------------------

namespace detail {

// C (+)= op(A) @ op(B). Shapes are of the stored tensors.
template <class S>
void gemm(Tensor<S>& C, const Tensor<S>& A, const Tensor<S>& B, bool ta, bool tb) {
    int m = ta ? A.cols() : A.rows();
    int k = ta ? A.rows() : A.cols();
    int kb = tb ? B.cols() : B.rows();
    int n = tb ? B.rows() : B.cols();
    if (k != kb) throw Error("matmul: inner dimensions disagree");
    if (C.rows() != m || C.cols() != n) throw Error("matmul: bad output shape");
    if (!ta && !tb) {
        for (int i = 0; i < m; ++i) {
            S* crow = C.row(i);
            const S* arow = A.row(i);
            for (int l = 0; l < k; ++l) axpy(crow, arow[l], B.row(l), n);
        }
    } else if (!ta && tb) {
        for (int i = 0; i < m; ++i) {
            S* crow = C.row(i);
            const S* arow = A.row(i);
            for (int j = 0; j < n; ++j) crow[j] += dot(arow, B.row(j), k);
        }
    } else if (ta && !tb) {
        for (int i = 0; i < k; ++i) {
            const S* arow = A.row(i);
            const S* brow = B.row(i);
            for (int l = 0; l < m; ++l) axpy(C.row(l), arow[l], brow, n);
        }
    } else {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                S s = 0;
                for (int l = 0; l < k; ++l) s += A.at(l, i) * B.at(j, l);
                C.at(i, j) += s;
            }
    }
}

}  // namespace detail

template <class S>
Var matmul(Tape<S>& t, Var a, Var b, bool ta = false, bool tb = false) {
    const Tensor<S>& A = t.val(a);
    const Tensor<S>& B = t.val(b);
    int m = ta ? A.cols() : A.rows();
    int n = tb ? B.rows() : B.cols();
    Tensor<S> out({m, n});
    detail::gemm(out, A, B, ta, tb);
    return t.make(std::move(out), {a.id, b.id}, [a, b, ta, tb](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& A2 = tt.node_val(a.id);
        const Tensor<S>& B2 = tt.node_val(b.id);
        if (tt.node_needs(a.id)) {
            Tensor<S>& ga = tt.grad_buf(a.id);
            if (!ta) detail::gemm(ga, g, B2, false, !tb);
            else detail::gemm(ga, B2, g, tb, true);
        }
        if (tt.node_needs(b.id)) {
            Tensor<S>& gb = tt.grad_buf(b.id);
            if (!tb) detail::gemm(gb, A2, g, !ta, false);
            else detail::gemm(gb, g, A2, true, ta);
        }
    });
}

// ---- shape ops ----------------------------------------------------------

template <class S>
Var reshape(Tape<S>& t, Var a, std::vector<int> shape) {
    const Tensor<S>& A = t.val(a);
    Tensor<S> out(shape, A.v);
    return t.make(std::move(out), {a.id}, [a](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (int64_t i = 0; i < g.numel(); ++i) buf.v[i] += g.v[i];
    });
}

template <class S>
Var slice_rows(Tape<S>& t, Var a, int r0, int r1) {
    const Tensor<S>& A = t.val(a);
    int T = A.rows(), C = A.cols();
    if (r0 < 0 || r1 > T || r0 >= r1) throw Error("slice_rows: bad range");
    Tensor<S> out({r1 - r0, C});
    std::copy(A.row(r0), A.row(r0) + static_cast<size_t>(r1 - r0) * C, out.v.begin());
    return t.make(std::move(out), {a.id}, [a, r0, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (int r = 0; r < g.rows(); ++r) detail::axpy(buf.row(r0 + r), S(1), g.row(r), C);
    });
}

template <class S>
Var slice_cols(Tape<S>& t, Var a, int c0, int c1) {
    const Tensor<S>& A = t.val(a);
    int T = A.rows(), C = A.cols();
    if (c0 < 0 || c1 > C || c0 >= c1) throw Error("slice_cols: bad range");
    Tensor<S> out({T, c1 - c0});
    for (int r = 0; r < T; ++r)
        std::copy(A.row(r) + c0, A.row(r) + c1, out.row(r));
    return t.make(std::move(out), {a.id}, [a, c0](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        int w = g.cols();
        for (int r = 0; r < g.rows(); ++r) detail::axpy(buf.row(r) + c0, S(1), g.row(r), w);
    });
}

template <class S>
Var concat_rows(Tape<S>& t, Var a, Var b) {
    const Tensor<S>& A = t.val(a);
    const Tensor<S>& B = t.val(b);
    if (A.cols() != B.cols()) throw Error("concat_rows: column mismatch");
    int C = A.cols();
    Tensor<S> out({A.rows() + B.rows(), C});
    std::copy(A.v.begin(), A.v.end(), out.v.begin());
    std::copy(B.v.begin(), B.v.end(), out.v.begin() + A.v.size());
    int ra = A.rows();
    return t.make(std::move(out), {a.id, b.id}, [a, b, ra, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        if (tt.node_needs(a.id)) {
            Tensor<S>& buf = tt.grad_buf(a.id);
            for (int64_t i = 0; i < buf.numel(); ++i) buf.v[i] += g.v[i];
        }
        if (tt.node_needs(b.id)) {
            Tensor<S>& buf = tt.grad_buf(b.id);
            size_t off = static_cast<size_t>(ra) * C;
            for (int64_t i = 0; i < buf.numel(); ++i) buf.v[i] += g.v[off + i];
        }
    });
}

template <class S>
Var concat_cols(Tape<S>& t, Var a, Var b) {
    const Tensor<S>& A = t.val(a);
    const Tensor<S>& B = t.val(b);
    if (A.rows() != B.rows()) throw Error("concat_cols: row mismatch");
    int T = A.rows(), Ca = A.cols(), Cb = B.cols();
    Tensor<S> out({T, Ca + Cb});
    for (int r = 0; r < T; ++r) {
        std::copy(A.row(r), A.row(r) + Ca, out.row(r));
        std::copy(B.row(r), B.row(r) + Cb, out.row(r) + Ca);
    }
    return t.make(std::move(out), {a.id, b.id}, [a, b, Ca, Cb](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        if (tt.node_needs(a.id)) {
            Tensor<S>& buf = tt.grad_buf(a.id);
            for (int r = 0; r < g.rows(); ++r) detail::axpy(buf.row(r), S(1), g.row(r), Ca);
        }
        if (tt.node_needs(b.id)) {
            Tensor<S>& buf = tt.grad_buf(b.id);
            for (int r = 0; r < g.rows(); ++r) detail::axpy(buf.row(r), S(1), g.row(r) + Ca, Cb);
        }
    });
}

template <class S>
Var transpose(Tape<S>& t, Var a) {
    const Tensor<S>& A = t.val(a);
    int T = A.rows(), C = A.cols();
    Tensor<S> out({C, T});
    for (int r = 0; r < T; ++r)
        for (int c = 0; c < C; ++c) out.at(c, r) = A.at(r, c);
    return t.make(std::move(out), {a.id}, [a, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        int T = buf.rows();
        for (int r = 0; r < T; ++r)
            for (int c = 0; c < C; ++c) buf.at(r, c) += g.at(c, r);
    });
}

template <class S>
Var flip_cols(Tape<S>& t, Var a) {
    const Tensor<S>& A = t.val(a);
    int T = A.rows(), C = A.cols();
    Tensor<S> out({T, C});
    for (int r = 0; r < T; ++r)
        for (int c = 0; c < C; ++c) out.at(r, c) = A.at(r, C - 1 - c);
    return t.make(std::move(out), {a.id}, [a, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < C; ++c) buf.at(r, C - 1 - c) += g.at(r, c);
    });
}

// Zero out the rows whose valid flag is 0 (grad zeroed there as well).
template <class S>
Var mask_rows(Tape<S>& t, Var a, const std::vector<int>& valid) {
    const Tensor<S>& A = t.val(a);
    if (static_cast<int>(valid.size()) != A.rows())
        throw Error("mask_rows: mask length " + std::to_string(valid.size()) + " does not match rows " +
                    std::to_string(A.rows()));
    Tensor<S> m(A.shape);
    int C = A.cols();
    for (int r = 0; r < A.rows(); ++r) {
        S f = valid[static_cast<size_t>(r)] ? S(1) : S(0);
        for (int c = 0; c < C; ++c) m.at(r, c) = f;
    }
    return mul(t, a, t.constant(std::move(m)));
}

// [1 x C] -> [T x C]
template <class S>
Var repeat_row(Tape<S>& t, Var a, int T) {
    const Tensor<S>& A = t.val(a);
    if (A.rows() != 1) throw Error("repeat_row: expected a single row");
    int C = A.cols();
    Tensor<S> out({T, C});
    for (int r = 0; r < T; ++r) std::copy(A.v.begin(), A.v.end(), out.row(r));
    return t.make(std::move(out), {a.id}, [a, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (int r = 0; r < g.rows(); ++r) detail::axpy(buf.v.data(), S(1), g.row(r), C);
    });
}

// Embedding lookup; backward scatter-adds into the table.
template <class S>
Var gather_rows(Tape<S>& t, Var table, const std::vector<int>& idx) {
    const Tensor<S>& A = t.val(table);
    int C = A.cols();
    Tensor<S> out({static_cast<int>(idx.size()), C});
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= A.rows()) throw Error("gather_rows: index out of range");
        std::copy(A.row(idx[i]), A.row(idx[i]) + C, out.row(static_cast<int>(i)));
    }
    return t.make(std::move(out), {table.id}, [table, idx, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(table.id);
        for (size_t i = 0; i < idx.size(); ++i)
            detail::axpy(buf.row(idx[i]), S(1), g.row(static_cast<int>(i)), C);
    });
}

// Repeat row j of x durations[j] times, in order. Backward sums per segment.
template <class S>
Var expand_rows(Tape<S>& t, Var a, const std::vector<int>& durations) {
    const Tensor<S>& A = t.val(a);
    if (static_cast<int>(durations.size()) != A.rows())
        throw Error("expand_rows: durations length must equal row count");
    int total = 0;
    for (int d : durations) {
        if (d < 0) throw Error("expand_rows: negative duration");
        total += d;
    }
    int C = A.cols();
    Tensor<S> out({total, C});
    int r = 0;
    for (int j = 0; j < A.rows(); ++j)
        for (int k = 0; k < durations[j]; ++k) std::copy(A.row(j), A.row(j) + C, out.row(r++));
    return t.make(std::move(out), {a.id}, [a, durations, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        int r = 0;
        for (size_t j = 0; j < durations.size(); ++j)
            for (int k = 0; k < durations[j]; ++k) detail::axpy(buf.row(static_cast<int>(j)), S(1), g.row(r++), C);
    });
}

// ---- fused row ops ------------------------------------------------------

template <class S>
Var softmax_rows(Tape<S>& t, Var a) {
    const Tensor<S>& A = t.val(a);
    int T = A.rows(), C = A.cols();
    Tensor<S> out({T, C});
    for (int r = 0; r < T; ++r) {
        const S* x = A.row(r);
        S* y = out.row(r);
        S mx = x[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, x[c]);
        S sum = 0;
        for (int c = 0; c < C; ++c) { y[c] = std::exp(x[c] - mx); sum += y[c]; }
        for (int c = 0; c < C; ++c) y[c] /= sum;
    }
    return t.make(std::move(out), {a.id}, [a, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& y = tt.node_val(self);
        Tensor<S>& buf = tt.grad_buf(a.id);
        for (int r = 0; r < g.rows(); ++r) {
            S gy = detail::dot(g.row(r), y.row(r), C);
            const S* gr = g.row(r);
            const S* yr = y.row(r);
            S* br = buf.row(r);
            for (int c = 0; c < C; ++c) br[c] += yr[c] * (gr[c] - gy);
        }
    });
}

// Per-row layer normalization with affine parameters gamma, beta [1 x C].
template <class S>
Var layer_norm(Tape<S>& t, Var x, Var gamma, Var beta, double eps = 1e-5) {
    const Tensor<S>& X = t.val(x);
    const Tensor<S>& G = t.val(gamma);
    const Tensor<S>& B = t.val(beta);
    int T = X.rows(), C = X.cols();
    if (G.numel() != C || B.numel() != C) throw Error("layer_norm: affine shape mismatch");
    Tensor<S> out({T, C});
    auto xhat = std::make_shared<Tensor<S>>(std::vector<int>{T, C});
    auto istd = std::make_shared<std::vector<S>>(T);
    for (int r = 0; r < T; ++r) {
        const S* xr = X.row(r);
        double mu = 0;
        for (int c = 0; c < C; ++c) mu += xr[c];
        mu /= C;
        double var = 0;
        for (int c = 0; c < C; ++c) { double d = xr[c] - mu; var += d * d; }
        var /= C;
        S is = static_cast<S>(1.0 / std::sqrt(var + eps));
        (*istd)[r] = is;
        S* hr = xhat->row(r);
        S* yr = out.row(r);
        for (int c = 0; c < C; ++c) {
            hr[c] = static_cast<S>((xr[c] - mu) * is);
            yr[c] = hr[c] * G.v[c] + B.v[c];
        }
    }
    return t.make(std::move(out), {x.id, gamma.id, beta.id},
                  [x, gamma, beta, xhat, istd, C](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& G2 = tt.node_val(gamma.id);
        int T = g.rows();
        if (tt.node_needs(gamma.id)) {
            Tensor<S>& gg = tt.grad_buf(gamma.id);
            for (int r = 0; r < T; ++r) {
                const S* gr = g.row(r);
                const S* hr = xhat->row(r);
                for (int c = 0; c < C; ++c) gg.v[c] += gr[c] * hr[c];
            }
        }
        if (tt.node_needs(beta.id)) {
            Tensor<S>& gb = tt.grad_buf(beta.id);
            for (int r = 0; r < T; ++r) detail::axpy(gb.v.data(), S(1), g.row(r), C);
        }
        if (tt.node_needs(x.id)) {
            Tensor<S>& gx = tt.grad_buf(x.id);
            for (int r = 0; r < T; ++r) {
                const S* gr = g.row(r);
                const S* hr = xhat->row(r);
                S* br = gx.row(r);
                double mh = 0, mhx = 0;
                for (int c = 0; c < C; ++c) {
                    double hgc = static_cast<double>(gr[c]) * G2.v[c];
                    mh += hgc;
                    mhx += hgc * hr[c];
                }
                mh /= C;
                mhx /= C;
                S is = (*istd)[r];
                for (int c = 0; c < C; ++c) {
                    double hgc = static_cast<double>(gr[c]) * G2.v[c];
                    br[c] += static_cast<S>(is * (hgc - mh - hr[c] * mhx));
                }
            }
        }
    });
}

// ---- convolutions -------------------------------------------------------

// x [T x Cin], w [K x Cin x Cout], b [1 x Cout] (optional), same padding.
template <class S>
Var conv1d(Tape<S>& t, Var x, Var w, Var b, int dilation = 1) {
    const Tensor<S>& X = t.val(x);
    const Tensor<S>& W = t.val(w);
    if (W.rank() != 3) throw Error("conv1d: weight must be [K x Cin x Cout]");
    int T = X.rows(), Cin = X.cols();
    int K = W.shape[0], WCin = W.shape[1], Cout = W.shape[2];
    if (WCin != Cin) throw Error("conv1d: channel mismatch");
    if (K % 2 == 0) throw Error("conv1d: kernel size must be odd");
    int pad = dilation * (K - 1) / 2;
    Tensor<S> out({T, Cout});
    if (b.valid()) {
        const Tensor<S>& B = t.val(b);
        if (B.numel() != Cout) throw Error("conv1d: bias shape mismatch");
        for (int r = 0; r < T; ++r) std::copy(B.v.begin(), B.v.end(), out.row(r));
    }
    const S* wbase = W.v.data();
    for (int r = 0; r < T; ++r) {
        S* orow = out.row(r);
        for (int k = 0; k < K; ++k) {
            int src = r + dilation * k - pad;
            if (src < 0 || src >= T) continue;
            const S* xrow = X.row(src);
            const S* wk = wbase + static_cast<size_t>(k) * Cin * Cout;
            for (int ci = 0; ci < Cin; ++ci) detail::axpy(orow, xrow[ci], wk + static_cast<size_t>(ci) * Cout, Cout);
        }
    }
    return t.make(std::move(out), b.valid() ? std::vector<int>{x.id, w.id, b.id} : std::vector<int>{x.id, w.id},
                  [x, w, b, K, Cin, Cout, dilation, pad](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& X2 = tt.node_val(x.id);
        const Tensor<S>& W2 = tt.node_val(w.id);
        int T = g.rows();
        bool nx = tt.node_needs(x.id), nw = tt.node_needs(w.id);
        Tensor<S>* gx = nx ? &tt.grad_buf(x.id) : nullptr;
        Tensor<S>* gw = nw ? &tt.grad_buf(w.id) : nullptr;
        for (int r = 0; r < T; ++r) {
            const S* grow = g.row(r);
            for (int k = 0; k < K; ++k) {
                int src = r + dilation * k - pad;
                if (src < 0 || src >= T) continue;
                const S* wk = W2.v.data() + static_cast<size_t>(k) * Cin * Cout;
                const S* xrow = X2.row(src);
                if (nx) {
                    S* gxr = gx->row(src);
                    for (int ci = 0; ci < Cin; ++ci)
                        gxr[ci] += detail::dot(grow, wk + static_cast<size_t>(ci) * Cout, Cout);
                }
                if (nw) {
                    S* gwk = gw->v.data() + static_cast<size_t>(k) * Cin * Cout;
                    for (int ci = 0; ci < Cin; ++ci)
                        detail::axpy(gwk + static_cast<size_t>(ci) * Cout, xrow[ci], grow, Cout);
                }
            }
        }
        if (b.valid() && tt.node_needs(b.id)) {
            Tensor<S>& gb = tt.grad_buf(b.id);
            for (int r = 0; r < T; ++r) detail::axpy(gb.v.data(), S(1), g.row(r), Cout);
        }
    });
}

// Transposed conv: x [T x Cin], w [K x Cin x Cout], stride s, pad (K - s)/2.
// Output length is exactly T * s when K = 2s (or more generally with even K-s).
template <class S>
Var conv_transpose1d(Tape<S>& t, Var x, Var w, Var b, int stride) {
    const Tensor<S>& X = t.val(x);
    const Tensor<S>& W = t.val(w);
    if (W.rank() != 3) throw Error("conv_transpose1d: weight must be [K x Cin x Cout]");
    int T = X.rows(), Cin = X.cols();
    int K = W.shape[0], WCin = W.shape[1], Cout = W.shape[2];
    if (WCin != Cin) throw Error("conv_transpose1d: channel mismatch");
    if (K < stride || (K - stride) % 2 != 0) throw Error("conv_transpose1d: need K >= stride with even K - stride");
    int pad = (K - stride) / 2;
    int To = (T - 1) * stride + K - 2 * pad;
    Tensor<S> out({To, Cout});
    if (b.valid()) {
        const Tensor<S>& B = t.val(b);
        if (B.numel() != Cout) throw Error("conv_transpose1d: bias shape mismatch");
        for (int r = 0; r < To; ++r) std::copy(B.v.begin(), B.v.end(), out.row(r));
    }
    for (int r = 0; r < T; ++r) {
        const S* xrow = X.row(r);
        for (int k = 0; k < K; ++k) {
            int dst = r * stride + k - pad;
            if (dst < 0 || dst >= To) continue;
            S* orow = out.row(dst);
            const S* wk = W.v.data() + static_cast<size_t>(k) * Cin * Cout;
            for (int ci = 0; ci < Cin; ++ci) detail::axpy(orow, xrow[ci], wk + static_cast<size_t>(ci) * Cout, Cout);
        }
    }
    return t.make(std::move(out), b.valid() ? std::vector<int>{x.id, w.id, b.id} : std::vector<int>{x.id, w.id},
                  [x, w, b, K, Cin, Cout, stride, pad](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& X2 = tt.node_val(x.id);
        const Tensor<S>& W2 = tt.node_val(w.id);
        int T = X2.rows(), To = g.rows();
        bool nx = tt.node_needs(x.id), nw = tt.node_needs(w.id);
        Tensor<S>* gx = nx ? &tt.grad_buf(x.id) : nullptr;
        Tensor<S>* gw = nw ? &tt.grad_buf(w.id) : nullptr;
        for (int r = 0; r < T; ++r) {
            const S* xrow = X2.row(r);
            S* gxr = nx ? gx->row(r) : nullptr;
            for (int k = 0; k < K; ++k) {
                int dst = r * stride + k - pad;
                if (dst < 0 || dst >= To) continue;
                const S* grow = g.row(dst);
                const S* wk = W2.v.data() + static_cast<size_t>(k) * Cin * Cout;
                if (nx)
                    for (int ci = 0; ci < Cin; ++ci)
                        gxr[ci] += detail::dot(grow, wk + static_cast<size_t>(ci) * Cout, Cout);
                if (nw) {
                    S* gwk = gw->v.data() + static_cast<size_t>(k) * Cin * Cout;
                    for (int ci = 0; ci < Cin; ++ci)
                        detail::axpy(gwk + static_cast<size_t>(ci) * Cout, xrow[ci], grow, Cout);
                }
            }
        }
        if (b.valid() && tt.node_needs(b.id)) {
            Tensor<S>& gb = tt.grad_buf(b.id);
            for (int r = 0; r < To; ++r) detail::axpy(gb.v.data(), S(1), g.row(r), Cout);
        }
    });
}

// Windowed relative-position logits: out[i][j] = dot(q_i, R[clip(j - i, -w, w) + w]).
template <class S>
Var relative_logits(Tape<S>& t, Var q, Var rel, int window) {
    const Tensor<S>& Q = t.val(q);
    const Tensor<S>& R = t.val(rel);
    int T = Q.rows(), D = Q.cols();
    if (R.rows() != 2 * window + 1 || R.cols() != D) throw Error("relative_logits: bad table shape");
    Tensor<S> out({T, T});
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) {
            int r = std::clamp(j - i, -window, window) + window;
            out.at(i, j) = detail::dot(Q.row(i), R.row(r), D);
        }
    return t.make(std::move(out), {q.id, rel.id}, [q, rel, window, D](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& Q2 = tt.node_val(q.id);
        const Tensor<S>& R2 = tt.node_val(rel.id);
        int T = Q2.rows();
        bool nq = tt.node_needs(q.id), nr = tt.node_needs(rel.id);
        Tensor<S>* gq = nq ? &tt.grad_buf(q.id) : nullptr;
        Tensor<S>* gr = nr ? &tt.grad_buf(rel.id) : nullptr;
        for (int i = 0; i < T; ++i)
            for (int j = 0; j < T; ++j) {
                int r = std::clamp(j - i, -window, window) + window;
                S gij = g.at(i, j);
                if (gij == S(0)) continue;
                if (nq) detail::axpy(gq->row(i), gij, R2.row(r), D);
                if (nr) detail::axpy(gr->row(r), gij, Q2.row(i), D);
            }
    });
}

}  // namespace voxflow
