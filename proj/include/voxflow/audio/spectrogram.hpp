#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "voxflow/core/fft.hpp"
#include "voxflow/core/ops.hpp"

namespace voxflow {

struct SpectrogramConfig {
    int sample_rate = 22050;
    int n_fft = 1024;
    int hop = 256;
    int win = 1024;
    int mel_bins = 80;
    double mel_fmin = 0.0;
    double mel_fmax = 8000.0;
    double log_floor = 1e-5;

    int bins() const { return n_fft / 2 + 1; }
    int frames_for(int64_t n_samples) const { return 1 + static_cast<int>(n_samples / hop); }

    void validate() const {
        if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) throw Error("spectrogram: n_fft must be a power of two");
        if (!(hop > 0 && hop <= win && win <= n_fft)) throw Error("spectrogram: need 0 < hop <= win <= n_fft");
        if (mel_bins < 1 || mel_fmax <= mel_fmin || mel_fmax > sample_rate / 2.0 + 1e-9)
            throw Error("spectrogram: bad mel range");
    }
};

// Periodic Hann of length `win`, centered in an n_fft-sized buffer.
template <class S>
std::vector<S> hann_window(const SpectrogramConfig& cfg) {
    std::vector<S> w(cfg.n_fft, S(0));
    int off = (cfg.n_fft - cfg.win) / 2;
    for (int n = 0; n < cfg.win; ++n)
        w[off + n] = static_cast<S>(0.5 - 0.5 * std::cos(2.0 * M_PI * n / cfg.win));
    return w;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters on FFT bin centers, [bins x mel_bins] so that
// mel = mag @ filter. No area normalization.
template <class S>
Tensor<S> mel_filterbank(const SpectrogramConfig& cfg) {
    int B = cfg.bins(), M = cfg.mel_bins;
    double mlo = hz_to_mel(cfg.mel_fmin), mhi = hz_to_mel(cfg.mel_fmax);
    std::vector<double> fpts(M + 2);
    for (int i = 0; i < M + 2; ++i) fpts[i] = mel_to_hz(mlo + (mhi - mlo) * i / (M + 1));
    Tensor<S> fb({B, M});
    for (int k = 0; k < B; ++k) {
        double fk = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
        for (int m = 0; m < M; ++m) {
            double lo = fpts[m], c = fpts[m + 1], hi = fpts[m + 2];
            double up = (fk - lo) / (c - lo);
            double down = (hi - fk) / (hi - c);
            fb.at(k, m) = static_cast<S>(std::max(0.0, std::min(up, down)));
        }
    }
    return fb;
}

namespace detail {

// Reflected index into [0, n) for i in [-n+1, 2n-1).
inline int64_t reflect_index(int64_t i, int64_t n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

}  // namespace detail

// Magnitude STFT with reflective center padding. Frame count = 1 + N/hop.
template <class S>
Tensor<S> stft_magnitude(const std::vector<S>& samples, const SpectrogramConfig& cfg) {
    cfg.validate();
    int64_t N = static_cast<int64_t>(samples.size());
    int P = cfg.n_fft / 2;
    if (N <= P) throw Error("stft: waveform shorter than n_fft/2");
    int F = cfg.frames_for(N), B = cfg.bins();
    auto win = hann_window<S>(cfg);
    Tensor<S> out({F, B});
    std::vector<std::complex<S>> buf(cfg.n_fft);
    for (int f = 0; f < F; ++f) {
        int64_t start = static_cast<int64_t>(f) * cfg.hop - P;
        for (int n = 0; n < cfg.n_fft; ++n)
            buf[n] = std::complex<S>(samples[detail::reflect_index(start + n, N)] * win[n], S(0));
        fft_inplace(buf, false);
        S* orow = out.row(f);
        for (int k = 0; k < B; ++k) orow[k] = std::abs(buf[k]);
    }
    return out;
}

// Tape op over a waveform node (any shape, numel = sample count).
template <class S>
Var stft_mag(Tape<S>& t, Var x, const SpectrogramConfig& cfg) {
    const Tensor<S>& X = t.val(x);
    Tensor<S> out = stft_magnitude(X.v, cfg);
    return t.make(std::move(out), {x.id}, [x, cfg](Tape<S>& tt, int self) {
        const Tensor<S>& g = tt.node_grad(self);
        const Tensor<S>& mag = tt.node_val(self);
        const Tensor<S>& X2 = tt.node_val(x.id);
        Tensor<S>& gx = tt.grad_buf(x.id);
        int64_t N = X2.numel();
        int P = cfg.n_fft / 2;
        int F = mag.rows(), B = mag.cols();
        auto win = hann_window<S>(cfg);
        const S eps = static_cast<S>(sizeof(S) >= 8 ? 1e-12 : 1e-9);
        std::vector<std::complex<S>> buf(cfg.n_fft), herm(cfg.n_fft);
        for (int f = 0; f < F; ++f) {
            int64_t start = static_cast<int64_t>(f) * cfg.hop - P;
            for (int n = 0; n < cfg.n_fft; ++n)
                buf[n] = std::complex<S>(X2.v[detail::reflect_index(start + n, N)] * win[n], S(0));
            fft_inplace(buf, false);
            // c_k = g_k * X_k / |X_k|; grad frame = n_fft * Re(IFFT(hermitian(c)))
            // with interior bins half-weighted so each conjugate pair sums once.
            const S* grow = g.row(f);
            const S* mrow = mag.row(f);
            for (auto& h : herm) h = std::complex<S>(0, 0);
            for (int k = 0; k < B; ++k) {
                std::complex<S> c = buf[k] * (grow[k] / std::max(mrow[k], eps));
                if (k == 0 || k == B - 1) {
                    herm[k] = c;
                } else {
                    herm[k] = c * S(0.5);
                    herm[cfg.n_fft - k] = std::conj(c) * S(0.5);
                }
            }
            fft_inplace(herm, true);
            for (int n = 0; n < cfg.n_fft; ++n) {
                S gn = static_cast<S>(cfg.n_fft) * herm[n].real() * win[n];
                gx.v[detail::reflect_index(start + n, N)] += gn;
            }
        }
    });
}

// log(max(mag @ mel_fb, floor)) as a tape subgraph.
template <class S>
Var log_mel_from_mag(Tape<S>& t, Var mag, Var mel_fb, double log_floor) {
    return log_clamp(t, matmul(t, mag, mel_fb), log_floor);
}

// Plain log-mel of a waveform (no autodiff), for caching and eval.
template <class S>
Tensor<S> log_mel(const std::vector<S>& samples, const SpectrogramConfig& cfg) {
    Tensor<S> mag = stft_magnitude(samples, cfg);
    Tensor<S> fb = mel_filterbank<S>(cfg);
    int F = mag.rows(), B = mag.cols(), M = cfg.mel_bins;
    Tensor<S> out({F, M});
    for (int f = 0; f < F; ++f)
        for (int k = 0; k < B; ++k) {
            S m = mag.at(f, k);
            if (m != S(0)) detail::axpy(out.row(f), m, fb.row(k), M);
        }
    S floor = static_cast<S>(cfg.log_floor);
    for (auto& x : out.v) x = std::log(std::max(x, floor));
    return out;
}

// Mean absolute log-mel difference between equal-length waveforms.
template <class S>
S mel_l1_loss(const std::vector<S>& y_hat, const std::vector<S>& y, const SpectrogramConfig& cfg) {
    if (y_hat.size() != y.size()) throw Error("mel_l1_loss: length mismatch");
    Tensor<S> a = log_mel(y_hat, cfg);
    Tensor<S> b = log_mel(y, cfg);
    S s = 0;
    for (int64_t i = 0; i < a.numel(); ++i) s += std::abs(a.v[i] - b.v[i]);
    return s / static_cast<S>(a.numel());
}

}  // namespace voxflow
