#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "support/gradcheck.hpp"
#include "voxflow/audio/resample.hpp"
#include "voxflow/audio/spectrogram.hpp"
#include "voxflow/audio/wav.hpp"

using namespace voxflow;

namespace {

std::vector<float> sine(double freq, int sr, int n, double amp = 0.5) {
    std::vector<float> x(n);
    for (int i = 0; i < n; ++i) x[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * i / sr));
    return x;
}

SpectrogramConfig tiny_cfg() {
    SpectrogramConfig c;
    c.sample_rate = 160;
    c.n_fft = 16;
    c.hop = 4;
    c.win = 16;
    c.mel_bins = 4;
    c.mel_fmax = 80.0;
    return c;
}

}  // namespace

TEST_CASE("spectrogram: frame count formula") {
    SpectrogramConfig cfg;
    std::vector<float> x(25600, 0.1f);
    Tensor<float> s = stft_magnitude(x, cfg);
    CHECK(s.rows() == 101);
    CHECK(s.cols() == 513);
    for (int n : {600, 1000, 4097}) {
        std::vector<float> y(n, 0.05f);
        CHECK(stft_magnitude(y, cfg).rows() == 1 + n / cfg.hop);
    }
}

TEST_CASE("spectrogram: zero waveform gives exactly zero magnitudes") {
    SpectrogramConfig cfg;
    std::vector<float> x(4096, 0.0f);
    Tensor<float> s = stft_magnitude(x, cfg);
    CHECK(s.max_abs() == 0.0f);
}

TEST_CASE("spectrogram: pure sine concentrates at its bin") {
    SpectrogramConfig cfg;
    int k = 64;  // bin-center frequency
    double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
    auto x = sine(f, cfg.sample_rate, 25600);
    Tensor<float> s = stft_magnitude(x, cfg);
    int mid = s.rows() / 2;
    int arg = 0;
    for (int b = 1; b < s.cols(); ++b)
        if (s.at(mid, b) > s.at(mid, arg)) arg = b;
    CHECK(arg == k);
}

TEST_CASE("spectrogram: rejects too-short input and bad config") {
    SpectrogramConfig cfg;
    std::vector<float> x(512, 0.1f);  // == n_fft/2
    CHECK_THROWS_AS(stft_magnitude(x, cfg), Error);
    SpectrogramConfig bad = cfg;
    bad.hop = 2048;
    std::vector<float> y(4096, 0.1f);
    CHECK_THROWS_AS(stft_magnitude(y, bad), Error);
}

TEST_CASE("mel filterbank covers its band") {
    SpectrogramConfig cfg;
    Tensor<float> fb = mel_filterbank<float>(cfg);
    CHECK(fb.rows() == cfg.bins());
    CHECK(fb.cols() == cfg.mel_bins);
    // every filter has some mass; bins above fmax contribute nothing
    for (int m = 0; m < cfg.mel_bins; ++m) {
        float mass = 0;
        for (int k = 0; k < fb.rows(); ++k) mass += fb.at(k, m);
        CHECK(mass > 0.0f);
    }
    int k_above = static_cast<int>(std::ceil(8000.0 * cfg.n_fft / cfg.sample_rate)) + 1;
    for (int k = k_above; k < fb.rows(); ++k)
        for (int m = 0; m < cfg.mel_bins; ++m) CHECK(fb.at(k, m) == 0.0f);
}

TEST_CASE("gradcheck: stft magnitude and log-mel graph") {
    SpectrogramConfig cfg = tiny_cfg();
    RandomStream r(123);
    Tensor<double> x({40});
    for (auto& v : x.v) v = 0.3 * r.normal() + 0.05;
    {
        // keep the check well-posed: no near-zero magnitudes
        Tensor<double> mag = stft_magnitude(x.v, cfg);
        double mn = 1e30;
        for (double m : mag.v) mn = std::min(mn, m);
        REQUIRE(mn > 2e-2);
    }
    auto res = voxflow::testing::gradcheck(
        [&](Tape<double>& t, const std::vector<Var>& v) {
            RandomStream rw(9);
            Var mag = stft_mag(t, v[0], cfg);
            Tensor<double> w = Tensor<double>::randn(t.val(mag).shape, rw);
            return sum_all(t, mul(t, mag, t.constant(std::move(w))));
        },
        {x});
    INFO(res.worst);
    CHECK(res.max_rel_err < 1e-5);

    auto res2 = voxflow::testing::gradcheck(
        [&](Tape<double>& t, const std::vector<Var>& v) {
            Var mag = stft_mag(t, v[0], cfg);
            Var fb = t.constant(mel_filterbank<double>(cfg));
            Var lm = log_mel_from_mag(t, mag, fb, cfg.log_floor);
            RandomStream rw(10);
            Tensor<double> w = Tensor<double>::randn(t.val(lm).shape, rw);
            return sum_all(t, mul(t, lm, t.constant(std::move(w))));
        },
        {x});
    INFO(res2.worst);
    CHECK(res2.max_rel_err < 1e-5);
}

TEST_CASE("mel l1 loss: identity, symmetry, sine-vs-zero oracle") {
    SpectrogramConfig cfg;
    auto yf = sine(440.0, cfg.sample_rate, 8192);
    std::vector<double> y(yf.begin(), yf.end());
    std::vector<double> z(8192, 0.0);
    CHECK(mel_l1_loss(y, y, cfg) == 0.0);
    CHECK(mel_l1_loss(y, z, cfg) == mel_l1_loss(z, y, cfg));
    CHECK_THROWS_AS(mel_l1_loss(y, std::vector<double>(100, 0.0), cfg), Error);

    // oracle: straight-line DFT -> triangular mel -> log, written independently
    int F = cfg.frames_for(8192), B = cfg.bins();
    std::vector<double> win(cfg.n_fft);
    for (int n = 0; n < cfg.n_fft; ++n) win[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / cfg.win);
    auto mel_pts = [&](int i) {
        double lo = 2595.0 * std::log10(1.0 + 0.0 / 700.0);
        double hi = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
        double m = lo + (hi - lo) * i / (cfg.mel_bins + 1);
        return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
    };
    double acc = 0;
    int64_t count = 0;
    for (int f = 0; f < F; ++f) {
        std::vector<double> mags(B);
        for (int k = 0; k < B; ++k) {
            double re = 0, im = 0;
            for (int n = 0; n < cfg.n_fft; ++n) {
                int64_t idx = static_cast<int64_t>(f) * cfg.hop - cfg.n_fft / 2 + n;
                if (idx < 0) idx = -idx;
                if (idx >= 8192) idx = 2 * 8192 - 2 - idx;
                double s = y[idx] * win[n];
                re += s * std::cos(2.0 * M_PI * k * n / cfg.n_fft);
                im -= s * std::sin(2.0 * M_PI * k * n / cfg.n_fft);
            }
            mags[k] = std::hypot(re, im);
        }
        for (int m = 0; m < cfg.mel_bins; ++m) {
            double lo = mel_pts(m), c = mel_pts(m + 1), hi = mel_pts(m + 2);
            double e = 0;
            for (int k = 0; k < B; ++k) {
                double fk = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
                double w = std::max(0.0, std::min((fk - lo) / (c - lo), (hi - fk) / (hi - c)));
                e += w * mags[k];
            }
            double log_sine = std::log(std::max(e, cfg.log_floor));
            double log_zero = std::log(cfg.log_floor);
            acc += std::abs(log_sine - log_zero);
            ++count;
        }
    }
    double oracle = acc / static_cast<double>(count);
    CHECK(mel_l1_loss(z, y, cfg) == doctest::Approx(oracle).epsilon(1e-4));
}

TEST_CASE("wav: 16-bit round trip and format errors") {
    std::string path = "test_roundtrip.wav";
    auto x = sine(300.0, 22050, 2000, 0.7);
    write_wav(path, x, 22050);
    WavData w = read_wav(path);
    CHECK(w.sample_rate == 22050);
    REQUIRE(w.samples.size() == x.size());
    float err = 0;
    for (size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(w.samples[i] - x[i]));
    CHECK(err < 1.0f / 32000.0f);
    std::remove(path.c_str());

    FILE* f = std::fopen("test_garbage.wav", "wb");
    std::fputs("this is not audio", f);
    std::fclose(f);
    CHECK_THROWS_AS(read_wav("test_garbage.wav"), Error);
    std::remove("test_garbage.wav");
    CHECK_THROWS_AS(read_wav("test_missing.wav"), Error);
}

TEST_CASE("resample: duration and waveform fidelity") {
    int n = 44100;
    auto x = sine(440.0, 44100, n);
    auto y = resample(x, 44100, 22050);
    CHECK(static_cast<int64_t>(y.size()) == 22050);
    // interior samples should closely track the analytic sine
    double err = 0;
    for (int i = 200; i < static_cast<int>(y.size()) - 200; ++i) {
        double ref = 0.5 * std::sin(2.0 * M_PI * 440.0 * i / 22050.0);
        err = std::max(err, std::abs(y[i] - ref));
    }
    CHECK(err < 5e-3);
    auto same = resample(x, 44100, 44100);
    CHECK(same == x);
    // duration preserved within one output sample for awkward ratios
    auto z = resample(x, 44100, 16000);
    CHECK(std::abs(static_cast<double>(z.size()) - n * 16000.0 / 44100.0) <= 1.0);
}
