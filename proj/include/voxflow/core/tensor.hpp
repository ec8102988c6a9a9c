#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "voxflow/core/rng.hpp"

namespace voxflow {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major tensor. Rank 1..3 in practice: sequences are [T x C],
// conv weights are [K x Cin x Cout], scalars are [1 x 1].
template <class S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> sh) : shape(std::move(sh)) {
        v.assign(static_cast<size_t>(numel_of(shape)), S(0));
    }
    Tensor(std::vector<int> sh, std::vector<S> data) : shape(std::move(sh)), v(std::move(data)) {
        if (static_cast<int64_t>(v.size()) != numel_of(shape)) throw Error("tensor: data size does not match shape");
    }

    static int64_t numel_of(const std::vector<int>& sh) {
        int64_t n = 1;
        for (int d : sh) {
            if (d < 0) throw Error("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> sh) { return Tensor(std::move(sh)); }

    static Tensor full(std::vector<int> sh, S value) {
        Tensor t(std::move(sh));
        for (auto& x : t.v) x = value;
        return t;
    }

    static Tensor scalar(S value) { return full({1, 1}, value); }

    static Tensor randn(std::vector<int> sh, RandomStream& rng, double stddev = 1.0) {
        Tensor t(std::move(sh));
        for (auto& x : t.v) x = static_cast<S>(rng.normal() * stddev);
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool empty() const { return v.empty(); }

    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const {
        if (shape.size() < 2) return shape.empty() ? 0 : 1;
        int c = 1;
        for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
        return c;
    }

    S& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
    const S& at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }

    S* row(int r) { return v.data() + static_cast<size_t>(r) * cols(); }
    const S* row(int r) const { return v.data() + static_cast<size_t>(r) * cols(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (S x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    S max_abs() const {
        S m = 0;
        for (S x : v) m = std::max(m, static_cast<S>(std::abs(static_cast<double>(x))));
        return m;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> t;
        t.shape = shape;
        t.v.resize(v.size());
        for (size_t i = 0; i < v.size(); ++i) t.v[i] = static_cast<U>(v[i]);
        return t;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

template <class S>
void check_shape(const Tensor<S>& t, std::initializer_list<int> sh, const char* where) {
    if (t.shape != std::vector<int>(sh))
        throw Error(std::string(where) + ": unexpected shape " + t.shape_str());
}

}  // namespace voxflow
