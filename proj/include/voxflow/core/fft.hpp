#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

// Iterative radix-2 Cooley-Tukey. In-place, n must be a power of two.
template <class S>
void fft_inplace(std::vector<std::complex<S>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw Error("fft: size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<S> wl(static_cast<S>(std::cos(ang)), static_cast<S>(std::sin(ang)));
        for (size_t i = 0; i < n; i += len) {
            std::complex<S> w(1);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<S> u = a[i + k];
                std::complex<S> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        S inv = S(1) / static_cast<S>(n);
        for (auto& x : a) x *= inv;
    }
}

}  // namespace voxflow
