#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "voxflow/model/config.hpp"
#include "voxflow/model/nn.hpp"

namespace voxflow {

// Two sub-sequences anchored at the ends of a T-frame sequence, overlapping
// by `overlap` frames in the middle.
struct OverlapSplit {
    int span1_begin = 0, span1_end = 0;
    int span2_begin = 0, span2_end = 0;
    int overlap = 0;

    int length() const { return span1_end - span1_begin; }
};

// overlap = round(rho*T), nudged by +-1 to make T + overlap even (picking the
// candidate whose ratio stays closest to rho); each span has (T + overlap)/2
// frames.
inline OverlapSplit split_overlapping(int T, double rho) {
    if (T < 5) throw Error("split_overlapping: need at least 5 frames, got " + std::to_string(T));
    if (rho < 0.2 || rho > 0.4) throw Error("split_overlapping: rho outside [0.2, 0.4]");
    int ol = static_cast<int>(std::lround(rho * T));
    if ((T + ol) % 2 != 0) {
        int down = ol - 1, up = ol + 1;
        double err_down = std::abs(static_cast<double>(down) / T - rho);
        double err_up = std::abs(static_cast<double>(up) / T - rho);
        ol = (down >= 0 && err_down < err_up) ? down : up;
    }
    int L = (T + ol) / 2;
    OverlapSplit s;
    s.span1_begin = 0;
    s.span1_end = L;
    s.span2_begin = T - L;
    s.span2_end = T;
    s.overlap = ol;
    return s;
}

// Res2-style multi-scale residual block with optional squeeze-excitation.
template <class S>
struct Res2Block {
    Conv1dLayer<S> in1x1, out1x1;
    std::vector<Conv1dLayer<S>> scale_convs;  // (scale-1) grouped convs
    LayerNormLayer<S> ln1, ln2;
    Linear<S> se1, se2;
    int channels = 0, scale = 0, group = 0;
    bool use_se = true;

    void init(int ch, int scale_, int dilation, bool se, RandomStream& rng) {
        channels = ch;
        scale = scale_;
        group = ch / scale_;
        use_se = se;
        in1x1.init(ch, ch, 1, 1, rng);
        out1x1.init(ch, ch, 1, 1, rng);
        ln1.init(ch);
        ln2.init(ch);
        scale_convs.resize(scale - 1);
        for (auto& c : scale_convs) c.init(group, group, 3, dilation, rng);
        if (use_se) {
            int bott = std::max(2, ch / 4);
            se1.init(ch, bott, rng);
            se2.init(bott, ch, rng);
        }
    }

    Var run(Tape<S>& t, Var x) {
        Var h = relu(t, ln1(t, in1x1(t, x)));
        std::vector<Var> groups;
        Var prev{};
        for (int i = 0; i < scale; ++i) {
            Var xi = slice_cols(t, h, i * group, (i + 1) * group);
            if (i == 0) {
                prev = xi;
            } else {
                Var inp = (i == 1) ? xi : add(t, xi, prev);
                prev = relu(t, scale_convs[i - 1](t, inp));
            }
            groups.push_back(prev);
        }
        Var cat = groups[0];
        for (size_t i = 1; i < groups.size(); ++i) cat = concat_cols(t, cat, groups[i]);
        Var h2 = relu(t, ln2(t, out1x1(t, cat)));
        if (use_se) {
            Var g = col_mean(t, h2);
            Var w = sigmoid_(t, se2(t, relu(t, se1(t, g))));
            h2 = mul(t, h2, w);
        }
        return add(t, x, h2);
    }

    void collect(ParamRefs<S>& o, const std::string& p) {
        in1x1.collect(o, p + ".in");
        out1x1.collect(o, p + ".out");
        ln1.collect(o, p + ".ln1");
        ln2.collect(o, p + ".ln2");
        for (size_t i = 0; i < scale_convs.size(); ++i)
            scale_convs[i].collect(o, p + ".conv" + std::to_string(i));
        if (use_se) {
            se1.collect(o, p + ".se1");
            se2.collect(o, p + ".se2");
        }
    }
};

// Channel-wise attention over time; emits [1 x 2C] (weighted mean | weighted std).
template <class S>
struct AttentiveStatsPooling {
    Conv1dLayer<S> att1, att2;
    int channels = 0;

    void init(int ch, int att_hidden, RandomStream& rng) {
        channels = ch;
        att1.init(ch, att_hidden, 1, 1, rng);
        att2.init(att_hidden, ch, 1, 1, rng);
    }

    struct Pooled { Var stats, std_branch; };

    Pooled run(Tape<S>& t, Var h) {
        int T = t.val(h).rows();
        Var e = att2(t, tanh_(t, att1(t, h)));
        // softmax over time, independently per channel
        Var alpha = transpose(t, softmax_rows(t, transpose(t, e)));
        Var mean = scale(t, col_mean(t, mul(t, alpha, h)), T);
        Var m2 = scale(t, col_mean(t, mul(t, alpha, mul(t, h, h))), T);
        Var var = sub(t, m2, mul(t, mean, mean));
        Var sd = sqrt_floor(t, var, 1e-6);
        return {concat_cols(t, mean, sd), sd};
    }

    void collect(ParamRefs<S>& o, const std::string& p) {
        att1.collect(o, p + ".att1");
        att2.collect(o, p + ".att2");
    }
};

// Latent frames -> fixed-size speaker embedding: conv front end, two
// SE-Res2 blocks, attentive statistics pooling, two feedforward layers.
// Output is not length-normalized.
template <class S>
struct SpeakerEncoder {
    Conv1dLayer<S> pre;
    LayerNormLayer<S> pre_ln;
    Res2Block<S> b1, b2;
    Conv1dLayer<S> mfa;
    AttentiveStatsPooling<S> asp;
    Linear<S> head1, head2;
    int d_in = 0;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        d_in = cfg.speaker_input_spectrogram ? cfg.spec_bins : cfg.d_latent;
        int C = cfg.spk_channels;
        pre.init(d_in, C, 5, 1, rng);
        pre_ln.init(C);
        b1.init(C, cfg.res2_scale, 2, true, rng);
        b2.init(C, cfg.res2_scale, 3, true, rng);
        mfa.init(C, C, 1, 1, rng);
        asp.init(C, std::max(4, C / 2), rng);
        head1.init(2 * C, 2 * cfg.d_spk, rng);
        head2.init(2 * cfg.d_spk, cfg.d_spk, rng);
    }

    // z_span [len x d_in] -> [1 x d_spk]
    Var embed(Tape<S>& t, Var z_span) {
        if (t.val(z_span).rows() < 1) throw Error("speaker encoder: empty span");
        if (t.val(z_span).cols() != d_in) throw Error("speaker encoder: input dimension mismatch");
        Var x = relu(t, pre_ln(t, pre(t, z_span)));
        x = b1.run(t, x);
        x = b2.run(t, x);
        x = relu(t, mfa(t, x));
        Var pooled = asp.run(t, x).stats;
        return head2(t, relu(t, head1(t, pooled)));
    }

    void collect(ParamRefs<S>& o, const std::string& p) {
        pre.collect(o, p + ".pre");
        pre_ln.collect(o, p + ".preln");
        b1.collect(o, p + ".block1");
        b2.collect(o, p + ".block2");
        mfa.collect(o, p + ".mfa");
        asp.collect(o, p + ".asp");
        head1.collect(o, p + ".head1");
        head2.collect(o, p + ".head2");
    }
};

// Embedding pairs for the leakage penalty: the two overlapping reference
// spans, the full GT sequence, and the span embedding passed downstream.
template <class S>
struct ContrastivePairs {
    Var s1, s2, s_gt;   // [1 x d_spk] each
    Var pair_overlap;   // s1 (+) s2
    Var pair_contrast;  // s_gt (+) s2
    Var s_downstream;   // s1 or s2, uniformly chosen by the caller
    bool chose_first = false;
};

inline bool choose_first_span(RandomStream& rng) { return rng.uniform() < 0.5; }

template <class S>
ContrastivePairs<S> make_contrastive_pairs(Tape<S>& t, SpeakerEncoder<S>& enc, Var z_gt, Var z_ref,
                                           const OverlapSplit& split, bool chose_first) {
    ContrastivePairs<S> p;
    p.chose_first = chose_first;
    p.s1 = enc.embed(t, slice_rows(t, z_ref, split.span1_begin, split.span1_end));
    p.s2 = enc.embed(t, slice_rows(t, z_ref, split.span2_begin, split.span2_end));
    p.s_gt = enc.embed(t, z_gt);
    p.pair_overlap = concat_cols(t, p.s1, p.s2);
    p.pair_contrast = concat_cols(t, p.s_gt, p.s2);
    p.s_downstream = chose_first ? p.s1 : p.s2;
    return p;
}

// Feedforward leakage discriminator over concatenated embedding pairs.
// Linear scalar output (least-squares adversarial form).
template <class S>
struct LeakageDisc {
    Linear<S> l1, l2, l3;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        int h = 4 * cfg.d_spk;
        l1.init(2 * cfg.d_spk, h, rng);
        l2.init(h, h, rng);
        l3.init(h, 1, rng);
    }

    Var run(Tape<S>& t, Var pair) {
        return l3(t, leaky_relu(t, l2(t, leaky_relu(t, l1(t, pair), 0.2)), 0.2));
    }

    // Same map with parameters treated as constants (for the encoder-side loss).
    Var run_frozen(Tape<S>& t, Var pair) const {
        return l3.frozen(t, leaky_relu(t, l2.frozen(t, leaky_relu(t, l1.frozen(t, pair), 0.2)), 0.2));
    }

    void collect(ParamRefs<S>& o, const std::string& p) {
        l1.collect(o, p + ".l1");
        l2.collect(o, p + ".l2");
        l3.collect(o, p + ".l3");
    }
};

// Sequence-level timbre-residual discriminator: Res2 blocks over frames,
// attentive statistics pooling, linear scalar head.
template <class S>
struct TimbreDisc {
    Conv1dLayer<S> pre;
    LayerNormLayer<S> pre_ln;
    Res2Block<S> b1, b2;
    AttentiveStatsPooling<S> asp;
    Linear<S> head;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        int C = cfg.dt_channels;
        pre.init(cfg.d_latent, C, 3, 1, rng);
        pre_ln.init(C);
        b1.init(C, cfg.res2_scale, 1, false, rng);
        b2.init(C, cfg.res2_scale, 2, false, rng);
        asp.init(C, std::max(4, C / 2), rng);
        head.init(2 * C, 1, rng);
    }

    // u [T x d_latent] -> scalar [1 x 1]
    Var run(Tape<S>& t, Var u) {
        Var x = relu(t, pre_ln(t, pre(t, u)));
        x = b1.run(t, x);
        x = b2.run(t, x);
        return head(t, asp.run(t, x).stats);
    }

    void collect(ParamRefs<S>& o, const std::string& p) {
        pre.collect(o, p + ".pre");
        pre_ln.collect(o, p + ".preln");
        b1.collect(o, p + ".block1");
        b2.collect(o, p + ".block2");
        asp.collect(o, p + ".asp");
        head.collect(o, p + ".head");
    }
};

}  // namespace voxflow
