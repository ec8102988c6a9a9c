#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "voxflow/model/config.hpp"
#include "voxflow/model/nn.hpp"

namespace voxflow {

template <class S>
struct GaussianStats {
    Var mu, log_sigma;
};

// z = mu + temperature * exp(log_sigma) * eps, reparameterized.
template <class S>
Var sample_gaussian(Tape<S>& t, GaussianStats<S> stats, RandomStream& rng, double temperature = 1.0) {
    Tensor<S> eps = Tensor<S>::randn(t.val(stats.mu).shape, rng, temperature);
    return add(t, stats.mu, mul(t, exp_(t, stats.log_sigma), t.constant(std::move(eps))));
}

// Spectrogram [T x bins] -> per-frame Gaussian latent stats. Dilated-conv
// residual stack; no speaker input by design.
template <class S>
struct PosteriorEncoder {
    Conv1dLayer<S> pre;
    WaveNet<S> wn;
    Conv1dLayer<S> proj;
    int d_latent = 0;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        d_latent = cfg.d_latent;
        pre.init(cfg.spec_bins, cfg.hidden, 1, 1, rng);
        wn.init(cfg.hidden, cfg.post_layers, cfg.post_kernel, 1, 0, rng);
        proj.init(cfg.hidden, 2 * cfg.d_latent, 1, 1, rng);
    }

    // Optional 0/1 frame mask: masked frames yield exactly zero stats and
    // cannot influence valid frames (the conv stack re-masks between layers).
    GaussianStats<S> operator()(Tape<S>& t, Var spec, const std::vector<int>* valid = nullptr) {
        Var h = pre(t, spec);
        if (valid) h = mask_rows(t, h, *valid);
        h = wn.run(t, h, Var{}, valid);
        Var st = proj(t, h);
        if (valid) st = mask_rows(t, st, *valid);
        return {slice_cols(t, st, 0, d_latent), slice_cols(t, st, d_latent, 2 * d_latent)};
    }

    void collect(ParamRefs<S>& out, const std::string& p) {
        pre.collect(out, p + ".pre");
        wn.collect(out, p + ".wn");
        proj.collect(out, p + ".proj");
    }
};

// Latent frames -> waveform, upsampling by the product of the stage factors
// (= hop). Transposed convs with a two-conv residual unit per stage; bounded
// tanh output. No speaker conditioning by design.
template <class S>
struct Decoder {
    Conv1dLayer<S> pre;
    std::vector<ConvT1dLayer<S>> ups;
    std::vector<Conv1dLayer<S>> res_a, res_b;
    Conv1dLayer<S> post;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        int ch = cfg.dec_channels;
        pre.init(cfg.d_latent, ch, 7, 1, rng);
        ups.resize(cfg.dec_factors.size());
        res_a.resize(ups.size());
        res_b.resize(ups.size());
        for (size_t i = 0; i < ups.size(); ++i) {
            int out = std::max(2, ch / 2);
            ups[i].init(ch, out, cfg.dec_factors[i], rng);
            res_a[i].init(out, out, 3, 1, rng);
            res_b[i].init(out, out, 3, 3, rng);
            ch = out;
        }
        post.init(ch, 1, 7, 1, rng);
    }

    // z [T x d_latent] -> waveform [T*hop]
    Var operator()(Tape<S>& t, Var z) {
        if (t.val(z).rows() < 1) throw Error("decoder: empty latent");
        Var x = pre(t, z);
        for (size_t i = 0; i < ups.size(); ++i) {
            x = ups[i](t, leaky_relu(t, x));
            Var r = res_b[i](t, leaky_relu(t, res_a[i](t, leaky_relu(t, x))));
            x = add(t, x, r);
        }
        Var w = tanh_(t, post(t, leaky_relu(t, x)));
        return reshape(t, w, {t.val(w).rows()});
    }

    void collect(ParamRefs<S>& out, const std::string& p) {
        pre.collect(out, p + ".pre");
        for (size_t i = 0; i < ups.size(); ++i) {
            std::string sp = p + ".stage" + std::to_string(i);
            ups[i].collect(out, sp + ".up");
            res_a[i].collect(out, sp + ".resa");
            res_b[i].collect(out, sp + ".resb");
        }
        post.collect(out, p + ".post");
    }
};

// Self-attention block with windowed relative-position logits shared across
// heads, post-norm residuals, and a convolutional feedforward.
template <class S>
struct AttnBlock {
    Linear<S> qkv, out;
    Param<S> rel;  // [(2w+1) x head_dim]
    LayerNormLayer<S> ln1, ln2;
    Conv1dLayer<S> ffn1, ffn2;
    int heads = 0, head_dim = 0, window = 0;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        heads = cfg.text_heads;
        head_dim = cfg.text_hidden / cfg.text_heads;
        window = cfg.rel_window;
        qkv.init(cfg.text_hidden, 3 * cfg.text_hidden, rng);
        out.init(cfg.text_hidden, cfg.text_hidden, rng);
        rel.init(Tensor<S>::randn({2 * window + 1, head_dim}, rng, 1.0 / std::sqrt(double(head_dim))));
        ln1.init(cfg.text_hidden);
        ln2.init(cfg.text_hidden);
        ffn1.init(cfg.text_hidden, cfg.text_ffn, 3, 1, rng);
        ffn2.init(cfg.text_ffn, cfg.text_hidden, 3, 1, rng);
    }

    Var run(Tape<S>& t, Var x) {
        int h = heads * head_dim;
        Var p = qkv(t, x);
        Var relv = t.param(rel);
        std::vector<Var> ctx;
        double inv = 1.0 / std::sqrt(static_cast<double>(head_dim));
        for (int i = 0; i < heads; ++i) {
            Var q = slice_cols(t, p, i * head_dim, (i + 1) * head_dim);
            Var k = slice_cols(t, p, h + i * head_dim, h + (i + 1) * head_dim);
            Var v = slice_cols(t, p, 2 * h + i * head_dim, 2 * h + (i + 1) * head_dim);
            Var logits = add(t, matmul(t, q, k, false, true), relative_logits(t, q, relv, window));
            Var att = softmax_rows(t, scale(t, logits, inv));
            ctx.push_back(matmul(t, att, v));
        }
        Var c = ctx[0];
        for (size_t i = 1; i < ctx.size(); ++i) c = concat_cols(t, c, ctx[i]);
        x = ln1(t, add(t, x, out(t, c)));
        Var f = ffn2(t, relu(t, ffn1(t, x)));
        return ln2(t, add(t, x, f));
    }

    void collect(ParamRefs<S>& o, const std::string& p) {
        qkv.collect(o, p + ".qkv");
        out.collect(o, p + ".out");
        o.push_back({p + ".rel", &rel});
        ln1.collect(o, p + ".ln1");
        ln2.collect(o, p + ".ln2");
        ffn1.collect(o, p + ".ffn1");
        ffn2.collect(o, p + ".ffn2");
    }
};

// Phoneme ids -> hidden states + per-phoneme prior Gaussian stats.
template <class S>
struct TextEncoder {
    EmbeddingTable<S> emb;
    std::vector<AttnBlock<S>> blocks;
    Conv1dLayer<S> proj;
    int d_latent = 0;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        d_latent = cfg.d_latent;
        emb.init(cfg.vocab_size, cfg.text_hidden, rng);
        blocks.resize(cfg.text_layers);
        for (auto& b : blocks) b.init(cfg, rng);
        proj.init(cfg.text_hidden, 2 * cfg.d_latent, 1, 1, rng);
    }

    struct Encoded {
        Var hidden;  // [n_ph x text_hidden]
        GaussianStats<S> stats;
    };

    Encoded operator()(Tape<S>& t, const std::vector<int>& phoneme_ids) {
        if (phoneme_ids.empty()) throw Error("text encoder: empty phoneme sequence");
        Var x = emb(t, phoneme_ids);
        for (auto& b : blocks) x = b.run(t, x);
        Var st = proj(t, x);
        return {x, {slice_cols(t, st, 0, d_latent), slice_cols(t, st, d_latent, 2 * d_latent)}};
    }

    void collect(ParamRefs<S>& o, const std::string& p) {
        emb.collect(o, p + ".emb");
        for (size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(o, p + ".block" + std::to_string(i));
        proj.collect(o, p + ".proj");
    }
};

// Log-domain duration regressor over text states, speaker-conditioned by an
// added linear projection. Inputs are detached: duration supervision trains
// only this module. Zero-init output conv -> exp(0) = 1 at initialization.
template <class S>
struct DurationPredictor {
    Conv1dLayer<S> c1, c2, proj;
    Linear<S> spk;
    LayerNormLayer<S> ln1, ln2;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        c1.init(cfg.text_hidden, cfg.dp_hidden, 3, 1, rng);
        spk.init(cfg.d_spk, cfg.dp_hidden, rng);
        c2.init(cfg.dp_hidden, cfg.dp_hidden, 3, 1, rng);
        ln1.init(cfg.dp_hidden);
        ln2.init(cfg.dp_hidden);
        proj.init(cfg.dp_hidden, 1, 1, 1, rng, 1.0, /*zero=*/true);
    }

    // h_text [n x text_hidden], s [1 x d_spk] -> log-durations [n x 1]
    Var log_durations(Tape<S>& t, Var h_text, Var s) {
        Var hd = detach(t, h_text);
        Var sd = detach(t, s);
        int n = t.val(hd).rows();
        Var x = add(t, c1(t, hd), repeat_row(t, spk(t, sd), n));
        x = ln1(t, relu(t, x));
        x = ln2(t, relu(t, c2(t, x)));
        return proj(t, x);
    }

    void collect(ParamRefs<S>& o, const std::string& p) {
        c1.collect(o, p + ".c1");
        spk.collect(o, p + ".spk");
        c2.collect(o, p + ".c2");
        ln1.collect(o, p + ".ln1");
        ln2.collect(o, p + ".ln2");
        proj.collect(o, p + ".proj");
    }
};

// Repeat phoneme-level stats to frame rate: row j appears durations[j] times.
template <class S>
GaussianStats<S> expand_to_frames(Tape<S>& t, GaussianStats<S> stats, const std::vector<int>& durations,
                                  int expect_frames) {
    GaussianStats<S> o{expand_rows(t, stats.mu, durations), expand_rows(t, stats.log_sigma, durations)};
    if (t.val(o.mu).rows() != expect_frames)
        throw Error("expand_to_frames: durations sum " + std::to_string(t.val(o.mu).rows()) +
                    " != requested frames " + std::to_string(expect_frames));
    return o;
}

// Round positive predictions to integer frame counts, minimum 1.
inline std::vector<int> quantize_durations(const std::vector<double>& pred, double pace) {
    std::vector<int> d(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!(pred[i] > 0) || !std::isfinite(pred[i])) throw Error("durations: non-positive prediction");
        d[i] = std::max(1, static_cast<int>(std::lround(pred[i] * pace)));
    }
    return d;
}

}  // namespace voxflow
