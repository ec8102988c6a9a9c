#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "voxflow/audio/resample.hpp"
#include "voxflow/audio/spectrogram.hpp"
#include "voxflow/data/vocab.hpp"
#include "voxflow/model/model.hpp"

namespace voxflow {

// Inference entry points. Both pipelines consume only reference/source audio
// and phoneme text — there is no ground-truth field anywhere in the API.
//
// Text-to-speech: reference spectrogram -> posterior sample -> speaker
// embedding over the full span -> phoneme encoding -> speaker-conditioned
// durations -> frame-rate prior -> temperature sample -> forward flow (adds
// timbre) -> waveform. Output length is exactly sum(durations) * hop.
//
// Voice conversion: sample the source latent, strip its timbre with the
// reverse flow under the source embedding, re-add the reference timbre with
// the forward flow, decode. The source frame count (rhythm) is preserved.
template <class S>
class Synthesizer {
public:
    Synthesizer(TtsModel<S>& model, SpectrogramConfig audio, Vocabulary vocab)
        : model_(model), audio_(audio), vocab_(std::move(vocab)) {
        audio_.validate();
        model_.cfg.validate();
        if (audio_.bins() != model_.cfg.spec_bins)
            throw Error("synthesizer: spectrogram bins do not match the model");
        if (model_.cfg.upsample_total() != audio_.hop)
            throw Error("synthesizer: decoder upsampling does not match the hop");
        if (vocab_.size() != model_.cfg.vocab_size)
            throw Error("synthesizer: vocabulary size does not match the model");
    }

    const SpectrogramConfig& audio() const { return audio_; }
    const Vocabulary& vocab() const { return vocab_; }

    // Stream tags, public so callers can reproduce the draw sequence.
    static constexpr uint64_t kTagTts = 0x747473ULL;
    static constexpr uint64_t kTagVc = 0x7663ULL;

    std::vector<float> tts(const std::vector<std::string>& phonemes,
                           const std::vector<float>& reference, int reference_rate, uint64_t seed,
                           double pace = 1.0, double temperature = 0.667) const {
        if (phonemes.empty()) throw Error("tts: empty phoneme sequence");
        if (!(pace > 0)) throw Error("tts: pace must be positive");
        std::vector<S> ref = prepare("tts: reference", reference, reference_rate);
        RandomStream rng(mix_seed(seed, kTagTts));
        Tape<S> t;

        auto [spec_v, z_ref] = sample_latent(t, ref, rng);
        Var s_ref = model_.speaker.embed(t, embedding_input(spec_v, z_ref));

        auto enc = model_.text(t, vocab_.encode(phonemes));
        Var log_d = model_.duration.log_durations(t, enc.hidden, s_ref);
        const Tensor<S>& ld = t.val(log_d);
        std::vector<double> pred(static_cast<size_t>(ld.rows()));
        for (int i = 0; i < ld.rows(); ++i) pred[static_cast<size_t>(i)] = std::exp(static_cast<double>(ld.at(i, 0)));
        std::vector<int> durations = quantize_durations(pred, pace);
        int total = 0;
        for (int d : durations) total += d;

        GaussianStats<S> prior = expand_to_frames(t, enc.stats, durations, total);
        Var m = sample_gaussian(t, prior, rng, temperature);
        Var z = model_.flow.forward(t, m, s_ref).value;
        std::vector<float> wav = to_float(t.val(model_.decoder(t, z)));
        if (static_cast<int>(wav.size()) != total * audio_.hop)
            throw Error("tts: decoder length deviated from the duration formula");
        return wav;
    }

    std::vector<float> vc(const std::vector<float>& source, int source_rate,
                          const std::vector<float>& reference, int reference_rate,
                          uint64_t seed) const {
        std::vector<S> src = prepare("vc: source", source, source_rate);
        std::vector<S> ref = prepare("vc: reference", reference, reference_rate);
        RandomStream rng(mix_seed(seed, kTagVc));
        Tape<S> t;

        auto [spec_src, z_src] = sample_latent(t, src, rng);
        auto [spec_ref, z_ref] = sample_latent(t, ref, rng);
        Var s_src = model_.speaker.embed(t, embedding_input(spec_src, z_src));
        Var s_ref = model_.speaker.embed(t, embedding_input(spec_ref, z_ref));

        // Timbre off under the source voice; the reverse output is used as-is
        // (no re-sampling) so the phonetic content survives unchanged.
        Var m_hat = model_.flow.reverse(t, z_src, s_src).value;

        // Invertibility guard: re-adding the same timbre must reproduce the
        // source latent. A violation means broken flow state, not bad input.
        Var z_back = model_.flow.forward(t, m_hat, s_src).value;
        double err = 0;
        const Tensor<S>& zb = t.val(z_back);
        const Tensor<S>& zs = t.val(z_src);
        for (int64_t i = 0; i < zs.numel(); ++i) {
            double d = std::abs(static_cast<double>(zb.v[i]) - static_cast<double>(zs.v[i]));
            if (!(d <= err)) err = d;  // NaN must not be dropped
        }
        if (!(err < 1e-4))
            throw Error("vc: flow self-inversion error " + std::to_string(err) + " exceeds 1e-4");

        Var z_conv = model_.flow.forward(t, m_hat, s_ref).value;
        std::vector<float> wav = to_float(t.val(model_.decoder(t, z_conv)));
        if (static_cast<int>(wav.size()) != zs.rows() * audio_.hop)
            throw Error("vc: output frame count deviated from the source");
        return wav;
    }

    // Deterministic embedding of an audio file: posterior MEAN latents (no
    // sampling) through the speaker encoder. This is the internal embedder
    // used for similarity evaluation.
    std::vector<double> embed_audio(const std::vector<float>& samples, int rate) const {
        // No minimum length here: the half-second floor protects synthesis
        // references, but any non-empty clip has a valid embedding.
        std::vector<S> wav = prepare("embed: audio", samples, rate, 0.0);
        Tape<S> t;
        Var spec_v = t.constant(stft_magnitude(wav, audio_));
        GaussianStats<S> post = model_.posterior(t, spec_v);
        Var s = model_.speaker.embed(
            t, model_.cfg.speaker_input_spectrogram ? spec_v : post.mu);
        const Tensor<S>& e = t.val(s);
        std::vector<double> out(static_cast<size_t>(e.numel()));
        for (int64_t i = 0; i < e.numel(); ++i) out[static_cast<size_t>(i)] = static_cast<double>(e.v[i]);
        return out;
    }

private:
    // Resample to the model rate and enforce the half-second minimum.
    std::vector<S> prepare(const std::string& what, const std::vector<float>& samples, int rate,
                           double min_seconds = 0.5) const {
        if (samples.empty()) throw Error(what + " audio is empty");
        if (rate < 1) throw Error(what + " has an invalid sample rate");
        std::vector<float> res = resample(samples, rate, audio_.sample_rate);
        if (static_cast<double>(res.size()) < min_seconds * audio_.sample_rate)
            throw Error(what + " must be at least " + std::to_string(min_seconds) + " s, got " +
                        std::to_string(static_cast<double>(res.size()) / audio_.sample_rate) + " s");
        return std::vector<S>(res.begin(), res.end());
    }

    struct SpecLatent {
        Var spec;
        Var z;
    };

    SpecLatent sample_latent(Tape<S>& t, const std::vector<S>& wav, RandomStream& rng) const {
        Var spec_v = t.constant(stft_magnitude(wav, audio_));
        GaussianStats<S> post = model_.posterior(t, spec_v);
        return {spec_v, sample_gaussian(t, post, rng)};
    }

    Var embedding_input(Var spec_v, Var z) const {
        return model_.cfg.speaker_input_spectrogram ? spec_v : z;
    }

    static std::vector<float> to_float(const Tensor<S>& w) {
        std::vector<float> out(static_cast<size_t>(w.numel()));
        for (int64_t i = 0; i < w.numel(); ++i) out[static_cast<size_t>(i)] = static_cast<float>(w.v[i]);
        return out;
    }

    TtsModel<S>& model_;
    SpectrogramConfig audio_;
    Vocabulary vocab_;
};

}  // namespace voxflow
