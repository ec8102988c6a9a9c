#pragma once

#include <string>
#include <vector>

#include "voxflow/model/config.hpp"
#include "voxflow/model/nn.hpp"

namespace voxflow {

// One affine coupling layer: the first channel half conditions a WaveNet
// (with the speaker embedding as global conditioning) that produces a
// log-scale and shift for the second half. Zero-initialized output conv
// makes every layer the identity map at initialization.
template <class S>
struct CouplingLayer {
    Conv1dLayer<S> pre;   // d/2 -> h, k1
    WaveNet<S> wn;
    Conv1dLayer<S> out;   // h -> d (log_s | shift), k1, zero-init
    int half = 0;
    double clamp_abs = 5.0;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        half = cfg.d_latent / 2;
        clamp_abs = cfg.flow_log_scale_clamp;
        pre.init(half, cfg.flow_hidden, 1, 1, rng);
        wn.init(cfg.flow_hidden, cfg.flow_depth, cfg.flow_kernel, 1, cfg.d_spk, rng);
        out.init(cfg.flow_hidden, 2 * half, 1, 1, rng, 1.0, /*zero=*/true);
    }

    struct Nets { Var log_s, shift; };

    Nets conditioner(Tape<S>& t, Var xa, Var s) {
        Var h = wn.run(t, pre(t, xa), s);
        Var o = out(t, h);
        Nets n;
        n.log_s = clamp(t, slice_cols(t, o, 0, half), -clamp_abs, clamp_abs);
        n.shift = slice_cols(t, o, half, 2 * half);
        return n;
    }

    // forward: y_b = x_b * exp(log_s) + shift; returns sum(log_s) as log-det
    std::pair<Var, Var> forward(Tape<S>& t, Var x, Var s) {
        Var xa = slice_cols(t, x, 0, half);
        Var xb = slice_cols(t, x, half, 2 * half);
        Nets n = conditioner(t, xa, s);
        Var yb = add(t, mul(t, xb, exp_(t, n.log_s)), n.shift);
        return {concat_cols(t, xa, yb), sum_all(t, n.log_s)};
    }

    std::pair<Var, Var> reverse(Tape<S>& t, Var y, Var s) {
        Var ya = slice_cols(t, y, 0, half);
        Var yb = slice_cols(t, y, half, 2 * half);
        Nets n = conditioner(t, ya, s);
        Var xb = mul(t, sub(t, yb, n.shift), exp_(t, neg(t, n.log_s)));
        return {concat_cols(t, ya, xb), neg(t, sum_all(t, n.log_s))};
    }

    void collect(ParamRefs<S>& out_refs, const std::string& p) {
        pre.collect(out_refs, p + ".pre");
        wn.collect(out_refs, p + ".wn");
        out.collect(out_refs, p + ".out");
    }
};

// Stack of coupling layers with a channel flip ahead of each layer, so both
// halves get transformed. The layer count is even, which makes the flips
// compose to the identity: a zero-initialized stack is exactly the identity
// map. forward maps the timbre-invariant domain to the timbre-dependent one.
template <class S>
struct TimbreFlow {
    std::vector<CouplingLayer<S>> layers;
    int d_latent = 0;

    void init(const ModelConfig& cfg, RandomStream& rng) {
        d_latent = cfg.d_latent;
        layers.resize(cfg.flow_layers);
        for (auto& l : layers) l.init(cfg, rng);
    }

    struct Result { Var value, log_det; };

    Result forward(Tape<S>& t, Var m, Var s) {
        if (t.val(m).cols() != d_latent) throw Error("flow: latent dimension mismatch");
        Var x = m;
        Var ld{};
        for (size_t i = 0; i < layers.size(); ++i) {
            x = flip_cols(t, x);
            auto [y, l] = layers[i].forward(t, x, s);
            x = y;
            ld = ld.valid() ? add(t, ld, l) : l;
        }
        return {x, ld};
    }

    Result reverse(Tape<S>& t, Var z, Var s) {
        if (t.val(z).cols() != d_latent) throw Error("flow: latent dimension mismatch");
        Var x = z;
        Var ld{};
        for (size_t i = layers.size(); i-- > 0;) {
            auto [y, l] = layers[i].reverse(t, x, s);
            x = flip_cols(t, y);
            ld = ld.valid() ? add(t, ld, l) : l;
        }
        return {x, ld};
    }

    void collect(ParamRefs<S>& out, const std::string& p) {
        for (size_t i = 0; i < layers.size(); ++i)
            layers[i].collect(out, p + ".coupling" + std::to_string(i));
    }
};

}  // namespace voxflow
