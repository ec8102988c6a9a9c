#pragma once

// Deterministic synthetic speech corpus: two harmonic "voices" with distinct
// pitch and spectral tilt, vowel-like phonemes shaped by formant envelopes.
// Everything is generated at test time and written as real WAV + manifest +
// vocabulary files, so the full load path is exercised without binary assets.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "voxflow/audio/spectrogram.hpp"
#include "voxflow/audio/wav.hpp"
#include "voxflow/core/rng.hpp"
#include "voxflow/data/manifest.hpp"
#include "voxflow/model/config.hpp"

namespace voxfix {

using voxflow::RandomStream;
using voxflow::SpectrogramConfig;
using voxflow::UtteranceRecord;

// 8 kHz analysis profile sized for fast desk runs; decoder factors 4*4*4
// match the 64-sample hop.
inline SpectrogramConfig mini_audio() {
    SpectrogramConfig a;
    a.sample_rate = 8000;
    a.n_fft = 256;
    a.hop = 64;
    a.win = 256;
    a.mel_bins = 20;
    a.mel_fmin = 0.0;
    a.mel_fmax = 4000.0;
    return a;
}

inline voxflow::ModelConfig mini_model(int vocab_size) {
    voxflow::ModelConfig m;
    m.spec_bins = 129;
    m.d_latent = 8;
    m.d_spk = 8;
    m.hidden = 12;
    m.post_layers = 2;
    m.post_kernel = 5;
    m.text_hidden = 16;
    m.text_layers = 1;
    m.text_heads = 2;
    m.text_ffn = 32;
    m.rel_window = 3;
    m.dp_hidden = 8;
    m.flow_layers = 2;
    m.flow_hidden = 8;
    m.flow_kernel = 3;
    m.flow_depth = 1;
    m.dec_factors = {4, 4, 4};
    m.dec_channels = 12;
    m.spk_channels = 8;
    m.res2_scale = 4;
    m.dt_channels = 8;
    m.vocab_size = vocab_size;
    return m;
}

struct Formant {
    double f1, f2, gain;
};

// Vowel targets (rough adult averages, Hz). "mm" is a dark hum.
inline Formant formant_of(const std::string& ph) {
    if (ph == "aa") return {700, 1220, 1.0};
    if (ph == "iy") return {300, 2300, 0.9};
    if (ph == "uw") return {350, 900, 0.9};
    if (ph == "eh") return {550, 1800, 1.0};
    if (ph == "mm") return {250, 500, 0.55};
    return {0, 0, 0};  // sil
}

struct Voice {
    double f0;
    double tilt;  // harmonic rolloff exponent; lower = brighter
};

inline Voice voice_of(const std::string& speaker) {
    if (speaker == "spk_a") return {115.0, 1.05};
    return {252.0, 0.65};
}

inline const std::vector<std::string>& fixture_symbols() {
    static const std::vector<std::string> syms = {"sil", "aa", "iy", "uw", "eh", "mm"};
    return syms;
}

// One phoneme segment: harmonics of f0 weighted by two formant bumps and the
// voice's spectral tilt, with raised-cosine edges and a whisper of noise.
inline void synth_segment(std::vector<float>& out, const std::string& ph, const Voice& v,
                          int n_samples, int sr, std::vector<double>& phase, RandomStream& rng) {
    Formant fm = formant_of(ph);
    const int n_harm = static_cast<int>(phase.size());
    std::vector<double> amp(n_harm, 0.0);
    for (int k = 0; k < n_harm; ++k) {
        double f = (k + 1) * v.f0;
        if (f > sr * 0.45 || fm.gain == 0.0) continue;
        double b1 = std::exp(-0.5 * std::pow((f - fm.f1) / 220.0, 2.0));
        double b2 = 0.7 * std::exp(-0.5 * std::pow((f - fm.f2) / 320.0, 2.0));
        amp[k] = fm.gain * (0.08 + b1 + b2) / std::pow(k + 1.0, v.tilt);
    }
    const int edge = sr * 12 / 1000;
    for (int n = 0; n < n_samples; ++n) {
        double t = static_cast<double>(n) / sr;
        double f0 = v.f0 * (1.0 + 0.008 * std::sin(2.0 * M_PI * 5.0 * t));
        double s = 0.0;
        for (int k = 0; k < n_harm; ++k) {
            if (amp[k] != 0.0) s += amp[k] * std::sin(phase[k]);
            phase[k] += 2.0 * M_PI * (k + 1) * f0 / sr;
        }
        double env = 1.0;
        if (n < edge) env = 0.5 - 0.5 * std::cos(M_PI * n / edge);
        if (n_samples - 1 - n < edge) env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * (n_samples - 1 - n) / edge));
        out.push_back(static_cast<float>(0.22 * env * s + 0.002 * rng.normal()));
    }
}

inline std::vector<float> synth_utterance(const std::vector<std::string>& phonemes,
                                          const std::vector<double>& durations_s, const Voice& v,
                                          int sr, RandomStream& rng) {
    std::vector<float> out;
    std::vector<double> phase(24, 0.0);
    for (size_t i = 0; i < phonemes.size(); ++i)
        synth_segment(out, phonemes[i], v, static_cast<int>(std::lround(durations_s[i] * sr)), sr,
                      phase, rng);
    return out;
}

struct Fixture {
    std::string dir;
    std::string manifest_path;
    std::string eval_manifest_path;  // empty when no eval utterances requested
    std::string vocab_path;
    std::vector<UtteranceRecord> records;
    std::vector<UtteranceRecord> eval_records;
};

struct FixtureSpec {
    int utts_per_speaker = 4;
    int eval_per_speaker = 0;  // longer utterances, listed in a second manifest
    double eval_len_s = 6.5;
    uint64_t seed = 77;
};

// Writes WAVs, manifest(s) and vocabulary under dir (created if needed).
inline Fixture build_fixture(const std::string& dir, const SpectrogramConfig& audio,
                             const FixtureSpec& fs = {}) {
    namespace sf = std::filesystem;
    sf::create_directories(dir);
    Fixture fx;
    fx.dir = dir;
    fx.vocab_path = dir + "/vocab.txt";
    {
        std::ofstream v(fx.vocab_path);
        for (const auto& s : fixture_symbols()) v << s << "\n";
    }
    const std::vector<std::string> vowels = {"aa", "iy", "uw", "eh", "mm"};
    RandomStream rng(fs.seed, 0xF17);

    auto make_utt = [&](const std::string& speaker, const std::string& name, int n_vowels,
                        double lo, double hi) {
        std::vector<std::string> ph = {"sil"};
        std::vector<double> dur = {rng.uniform(0.08, 0.12)};
        for (int i = 0; i < n_vowels; ++i) {
            ph.push_back(vowels[static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(vowels.size())))]);
            dur.push_back(rng.uniform(lo, hi));
        }
        ph.push_back("sil");
        dur.push_back(rng.uniform(0.08, 0.12));
        std::vector<float> wav = synth_utterance(ph, dur, voice_of(speaker), audio.sample_rate, rng);
        std::string path = dir + "/" + name + ".wav";
        voxflow::write_wav(path, wav, audio.sample_rate);
        UtteranceRecord rec;
        rec.audio_path = path;
        rec.speaker_id = speaker;
        rec.phonemes = ph;
        rec.duration_s = static_cast<double>(wav.size()) / audio.sample_rate;
        return rec;
    };

    for (const std::string& spk : {std::string("spk_a"), std::string("spk_b")})
        for (int u = 0; u < fs.utts_per_speaker; ++u)
            fx.records.push_back(make_utt(spk, spk + "_train" + std::to_string(u), 5, 0.18, 0.28));
    if (fs.eval_per_speaker > 0) {
        int n_vowels = std::max(1, static_cast<int>(std::lround(fs.eval_len_s / 0.26)));
        for (const std::string& spk : {std::string("spk_a"), std::string("spk_b")})
            for (int u = 0; u < fs.eval_per_speaker; ++u)
                fx.eval_records.push_back(
                    make_utt(spk, spk + "_eval" + std::to_string(u), n_vowels, 0.22, 0.30));
    }

    auto write_manifest = [](const std::string& path, const std::vector<UtteranceRecord>& recs) {
        std::ofstream m(path);
        for (const auto& r : recs) {
            m << r.audio_path << "|" << r.speaker_id << "|";
            for (size_t i = 0; i < r.phonemes.size(); ++i) m << (i ? " " : "") << r.phonemes[i];
            m << "\n";
        }
    };
    fx.manifest_path = dir + "/manifest.txt";
    write_manifest(fx.manifest_path, fx.records);
    if (!fx.eval_records.empty()) {
        fx.eval_manifest_path = dir + "/eval_manifest.txt";
        write_manifest(fx.eval_manifest_path, fx.eval_records);
    }
    return fx;
}

}  // namespace voxfix
