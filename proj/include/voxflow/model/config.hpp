#pragma once

#include <vector>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

// Network dimensions. Toy-sized defaults; the full-scale preset overrides
// these through the config file.
struct ModelConfig {
    int spec_bins = 513;  // n_fft/2 + 1
    int d_latent = 16;
    int d_spk = 32;

    int hidden = 32;  // posterior encoder width
    int post_layers = 4;
    int post_kernel = 5;

    int text_hidden = 32;
    int text_layers = 2;
    int text_heads = 2;
    int text_ffn = 64;
    int rel_window = 4;
    int dp_hidden = 32;

    int flow_layers = 4;
    int flow_hidden = 32;
    int flow_kernel = 5;
    int flow_depth = 2;
    double flow_log_scale_clamp = 5.0;

    std::vector<int> dec_factors = {8, 8, 4};
    int dec_channels = 48;

    int spk_channels = 32;
    int res2_scale = 4;
    int dt_channels = 24;

    int vocab_size = 0;                      // filled in from the vocabulary
    bool speaker_input_spectrogram = false;  // ablation: feed spec instead of z

    int upsample_total() const {
        int u = 1;
        for (int f : dec_factors) u *= f;
        return u;
    }

    void validate() const {
        if (d_latent < 2 || d_latent % 2 != 0) throw Error("model: d_latent must be even and >= 2");
        if (flow_layers < 2 || flow_layers % 2 != 0)
            throw Error("model: flow_layers must be even and >= 2 (flip symmetry)");
        if (vocab_size < 1) throw Error("model: vocabulary not set");
        if (text_hidden % text_heads != 0) throw Error("model: text_hidden must divide by heads");
        if (dec_factors.empty()) throw Error("model: decoder needs upsample factors");
        for (int f : dec_factors)
            if (f < 2) throw Error("model: upsample factors must be >= 2");
        if (spk_channels % res2_scale != 0 || dt_channels % res2_scale != 0)
            throw Error("model: res2 scale must divide channel counts");
    }
};

}  // namespace voxflow
