#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

// Frame log-likelihoods under per-phoneme diagonal Gaussians:
// ll[t][j] = log N(u_t; mu_j, exp(logs_j)). Plain math — the alignment
// search is non-differentiable by design.
template <class S>
Tensor<double> alignment_log_likelihood(const Tensor<S>& u, const Tensor<S>& mu,
                                        const Tensor<S>& log_sigma) {
    int T = u.rows(), d = u.cols(), n = mu.rows();
    if (mu.cols() != d || !mu.same_shape(log_sigma)) throw Error("alignment: stats shape mismatch");
    const double log2pi = std::log(2.0 * M_PI);
    Tensor<double> ll({T, n});
    for (int j = 0; j < n; ++j) {
        double base = 0;
        for (int i = 0; i < d; ++i) base += -0.5 * log2pi - static_cast<double>(log_sigma.at(j, i));
        for (int t = 0; t < T; ++t) {
            double acc = base;
            for (int i = 0; i < d; ++i) {
                double diff = static_cast<double>(u.at(t, i)) - static_cast<double>(mu.at(j, i));
                double inv = std::exp(-2.0 * static_cast<double>(log_sigma.at(j, i)));
                acc -= 0.5 * diff * diff * inv;
            }
            ll.at(t, j) = acc;
        }
    }
    return ll;
}

// Monotonic alignment search: the duration assignment maximizing total
// log-likelihood over all monotone surjective phoneme->frame alignments.
// Viterbi over (frame, phoneme) with moves "stay" and "advance".
inline std::vector<int> monotonic_align(const Tensor<double>& ll) {
    int T = ll.rows(), n = ll.cols();
    if (n < 1) throw Error("monotonic_align: no phonemes");
    if (T < n) throw Error("monotonic_align: fewer frames than phonemes");
    const double neg_inf = -std::numeric_limits<double>::infinity();
    Tensor<double> q({T, n});
    std::vector<uint8_t> from_prev(static_cast<size_t>(T) * n, 0);
    for (int t = 0; t < T; ++t) {
        // phoneme j reachable only if j <= t and enough frames remain: n - 1 - j <= T - 1 - t
        int jlo = std::max(0, n - (T - t));
        int jhi = std::min(n - 1, t);
        for (int j = 0; j < n; ++j) q.at(t, j) = neg_inf;
        for (int j = jlo; j <= jhi; ++j) {
            double best;
            if (t == 0) {
                best = 0.0;
            } else {
                double stay = q.at(t - 1, j);
                double adv = j > 0 ? q.at(t - 1, j - 1) : neg_inf;
                if (adv > stay) {
                    best = adv;
                    from_prev[static_cast<size_t>(t) * n + j] = 1;
                } else {
                    best = stay;
                }
            }
            q.at(t, j) = best + ll.at(t, j);
        }
    }
    std::vector<int> durations(n, 0);
    int j = n - 1;
    for (int t = T - 1; t >= 0; --t) {
        durations[j]++;
        if (t > 0 && from_prev[static_cast<size_t>(t) * n + j]) --j;
    }
    return durations;
}

}  // namespace voxflow
