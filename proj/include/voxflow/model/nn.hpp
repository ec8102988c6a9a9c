#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "voxflow/core/ops.hpp"
#include "voxflow/core/rng.hpp"

// Small trainable layers. Each owns Params, builds its forward as tape ops,
// and registers its parameters under a dotted path via collect().
namespace voxflow {

template <class S>
struct Linear {
    Param<S> W;  // [in x out]
    Param<S> b;  // [1 x out]

    void init(int in, int out, RandomStream& rng, double gain = 1.0, bool zero = false) {
        double sd = zero ? 0.0 : gain / std::sqrt(static_cast<double>(in));
        W.init(Tensor<S>::randn({in, out}, rng, sd));
        b.init(Tensor<S>::zeros({1, out}));
    }

    Var operator()(Tape<S>& t, Var x) { return add(t, matmul(t, x, t.param(W)), t.param(b)); }

    Var frozen(Tape<S>& t, Var x) const {
        return add(t, matmul(t, x, t.param_frozen(W)), t.param_frozen(b));
    }

    void collect(ParamRefs<S>& out, const std::string& p) {
        out.push_back({p + ".W", &W});
        out.push_back({p + ".b", &b});
    }
};

template <class S>
struct Conv1dLayer {
    Param<S> W;  // [K x in x out]
    Param<S> b;  // [1 x out]
    int dilation = 1;

    void init(int in, int out, int k, int dil, RandomStream& rng, double gain = 1.0, bool zero = false) {
        dilation = dil;
        double sd = zero ? 0.0 : gain / std::sqrt(static_cast<double>(in * k));
        W.init(Tensor<S>::randn({k, in, out}, rng, sd));
        b.init(Tensor<S>::zeros({1, out}));
    }

    Var operator()(Tape<S>& t, Var x) { return conv1d(t, x, t.param(W), t.param(b), dilation); }

    Var frozen(Tape<S>& t, Var x) const {
        return conv1d(t, x, t.param_frozen(W), t.param_frozen(b), dilation);
    }

    void collect(ParamRefs<S>& out, const std::string& p) {
        out.push_back({p + ".W", &W});
        out.push_back({p + ".b", &b});
    }
};

template <class S>
struct ConvT1dLayer {
    Param<S> W;  // [K x in x out], K = 2 * stride
    Param<S> b;
    int stride = 1;

    void init(int in, int out, int stride_, RandomStream& rng, double gain = 1.0) {
        stride = stride_;
        int k = 2 * stride_;
        W.init(Tensor<S>::randn({k, in, out}, rng, gain / std::sqrt(static_cast<double>(in * k))));
        b.init(Tensor<S>::zeros({1, out}));
    }

    Var operator()(Tape<S>& t, Var x) { return conv_transpose1d(t, x, t.param(W), t.param(b), stride); }

    void collect(ParamRefs<S>& out, const std::string& p) {
        out.push_back({p + ".W", &W});
        out.push_back({p + ".b", &b});
    }
};

template <class S>
struct LayerNormLayer {
    Param<S> gamma, beta;

    void init(int dim) {
        gamma.init(Tensor<S>::full({1, dim}, S(1)));
        beta.init(Tensor<S>::zeros({1, dim}));
    }

    Var operator()(Tape<S>& t, Var x) { return layer_norm(t, x, t.param(gamma), t.param(beta)); }

    void collect(ParamRefs<S>& out, const std::string& p) {
        out.push_back({p + ".gamma", &gamma});
        out.push_back({p + ".beta", &beta});
    }
};

template <class S>
struct EmbeddingTable {
    Param<S> table;  // [vocab x dim]

    void init(int vocab, int dim, RandomStream& rng) {
        table.init(Tensor<S>::randn({vocab, dim}, rng, 1.0 / std::sqrt(static_cast<double>(dim))));
    }

    Var operator()(Tape<S>& t, const std::vector<int>& ids) {
        return gather_rows(t, t.param(table), ids);
    }

    void collect(ParamRefs<S>& out, const std::string& p) { out.push_back({p + ".table", &table}); }
};

// tanh/sigmoid gate over a [T x 2h] pre-activation.
template <class S>
Var gated_unit(Tape<S>& t, Var pre, int h) {
    Var a = slice_cols(t, pre, 0, h);
    Var g = slice_cols(t, pre, h, 2 * h);
    return mul(t, tanh_(t, a), sigmoid_(t, g));
}

// WaveNet-style stack of gated dilated convolutions with residual/skip
// connections and optional global conditioning added per layer.
template <class S>
struct WaveNet {
    int layers = 0, hidden = 0, dil_base = 1;
    std::vector<Conv1dLayer<S>> in_convs;   // h -> 2h
    std::vector<Linear<S>> cond;            // d_cond -> 2h (empty if unconditioned)
    std::vector<Conv1dLayer<S>> res_skip;   // h -> 2h (res+skip), last layer h -> h (skip only)

    void init(int hidden_, int n_layers, int kernel, int dil_base_, int d_cond, RandomStream& rng) {
        layers = n_layers;
        hidden = hidden_;
        dil_base = dil_base_;
        in_convs.resize(layers);
        res_skip.resize(layers);
        if (d_cond > 0) cond.resize(layers);
        int dil = 1;
        for (int i = 0; i < layers; ++i) {
            in_convs[i].init(hidden, 2 * hidden, kernel, dil, rng);
            if (d_cond > 0) cond[i].init(d_cond, 2 * hidden, rng);
            int out = (i == layers - 1) ? hidden : 2 * hidden;
            res_skip[i].init(hidden, out, 1, 1, rng);
            dil *= dil_base;
        }
    }

    // x [T x h]; g [1 x d_cond] global conditioning, Var{} if none.
    // `valid` (0/1 per row) keeps invalid rows zeroed between layers so their
    // contents can never reach valid rows through the dilated convolutions;
    // callers pass an already-masked x.
    Var run(Tape<S>& t, Var x, Var g = Var{}, const std::vector<int>* valid = nullptr) {
        Var out{};
        int T = t.val(x).rows();
        for (int i = 0; i < layers; ++i) {
            Var pre = in_convs[i](t, x);
            if (!cond.empty() && g.valid()) pre = add(t, pre, repeat_row(t, cond[i](t, g), T));
            Var act = gated_unit(t, pre, hidden);
            Var rs = res_skip[i](t, act);
            if (i == layers - 1) {
                out = out.valid() ? add(t, out, rs) : rs;
            } else {
                x = add(t, x, slice_cols(t, rs, 0, hidden));
                if (valid) x = mask_rows(t, x, *valid);
                Var skip = slice_cols(t, rs, hidden, 2 * hidden);
                out = out.valid() ? add(t, out, skip) : skip;
            }
        }
        return out;
    }

    void collect(ParamRefs<S>& out, const std::string& p) {
        for (int i = 0; i < layers; ++i) {
            in_convs[i].collect(out, p + ".in" + std::to_string(i));
            if (!cond.empty()) cond[i].collect(out, p + ".cond" + std::to_string(i));
            res_skip[i].collect(out, p + ".rs" + std::to_string(i));
        }
    }
};

}  // namespace voxflow
