#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxflow/audio/spectrogram.hpp"
#include "voxflow/model/model.hpp"
#include "voxflow/train/train_config.hpp"

namespace voxflow {

// Single-file checkpoint: header, JSON metadata (configs, counters, vocab),
// then one named blob per parameter holding value + Adam moments. The
// metadata echoes everything needed to rebuild the model for inference
// without the original config files.
//
// Layout: magic(8) | version(u32) | scalar_width(u8) | json_len(u64) | json |
//         blobs... | end marker(8). Blob: name_len(u32) | name | rank(u32) |
//         dims(u32 each) | value | adam_m | adam_v (raw scalars).
inline constexpr char kCkptMagic[8] = {'V', 'O', 'X', 'C', 'K', 'P', 'T', '\0'};
inline constexpr char kCkptEnd[8] = {'E', 'N', 'D', 'C', 'K', 'P', 'T', '\0'};
inline constexpr uint32_t kCkptVersion = 1;

struct CheckpointMeta {
    int64_t step = 0;
    int64_t adam_t_gen = 0;
    int64_t adam_t_disc = 0;
    ModelConfig model;
    TrainConfig train;
    SpectrogramConfig audio;
    std::vector<std::string> vocab_symbols;
};

namespace ckpt_detail {

inline nlohmann::json model_to_json(const ModelConfig& c) {
    return {{"spec_bins", c.spec_bins},       {"d_latent", c.d_latent},
            {"d_spk", c.d_spk},               {"hidden", c.hidden},
            {"post_layers", c.post_layers},   {"post_kernel", c.post_kernel},
            {"text_hidden", c.text_hidden},   {"text_layers", c.text_layers},
            {"text_heads", c.text_heads},     {"text_ffn", c.text_ffn},
            {"rel_window", c.rel_window},     {"dp_hidden", c.dp_hidden},
            {"flow_layers", c.flow_layers},   {"flow_hidden", c.flow_hidden},
            {"flow_kernel", c.flow_kernel},   {"flow_depth", c.flow_depth},
            {"flow_log_scale_clamp", c.flow_log_scale_clamp},
            {"dec_factors", c.dec_factors},   {"dec_channels", c.dec_channels},
            {"spk_channels", c.spk_channels}, {"res2_scale", c.res2_scale},
            {"dt_channels", c.dt_channels},   {"vocab_size", c.vocab_size},
            {"speaker_input_spectrogram", c.speaker_input_spectrogram}};
}

inline ModelConfig model_from_json(const nlohmann::json& j) {
    ModelConfig c;
    j.at("spec_bins").get_to(c.spec_bins);
    j.at("d_latent").get_to(c.d_latent);
    j.at("d_spk").get_to(c.d_spk);
    j.at("hidden").get_to(c.hidden);
    j.at("post_layers").get_to(c.post_layers);
    j.at("post_kernel").get_to(c.post_kernel);
    j.at("text_hidden").get_to(c.text_hidden);
    j.at("text_layers").get_to(c.text_layers);
    j.at("text_heads").get_to(c.text_heads);
    j.at("text_ffn").get_to(c.text_ffn);
    j.at("rel_window").get_to(c.rel_window);
    j.at("dp_hidden").get_to(c.dp_hidden);
    j.at("flow_layers").get_to(c.flow_layers);
    j.at("flow_hidden").get_to(c.flow_hidden);
    j.at("flow_kernel").get_to(c.flow_kernel);
    j.at("flow_depth").get_to(c.flow_depth);
    j.at("flow_log_scale_clamp").get_to(c.flow_log_scale_clamp);
    c.dec_factors = j.at("dec_factors").get<std::vector<int>>();
    j.at("dec_channels").get_to(c.dec_channels);
    j.at("spk_channels").get_to(c.spk_channels);
    j.at("res2_scale").get_to(c.res2_scale);
    j.at("dt_channels").get_to(c.dt_channels);
    j.at("vocab_size").get_to(c.vocab_size);
    j.at("speaker_input_spectrogram").get_to(c.speaker_input_spectrogram);
    return c;
}

inline nlohmann::json train_to_json(const TrainConfig& c) {
    return {{"lr0", c.lr0},
            {"lr_gamma", c.lr_gamma},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"weight_decay", c.weight_decay},
            {"adam_eps", c.adam_eps},
            {"grad_clip", c.grad_clip},
            {"lambda_se", c.lambda_se},
            {"lambda_d", c.lambda_d},
            {"rho_min", c.rho_min},
            {"rho_max", c.rho_max},
            {"recon_weight", c.recon_weight},
            {"kl_weight", c.kl_weight},
            {"duration_weight", c.duration_weight},
            {"batch_size", c.batch_size},
            {"segment_frames", c.segment_frames},
            {"seed", c.seed}};
}

inline TrainConfig train_from_json(const nlohmann::json& j) {
    TrainConfig c;
    j.at("lr0").get_to(c.lr0);
    j.at("lr_gamma").get_to(c.lr_gamma);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("weight_decay").get_to(c.weight_decay);
    j.at("adam_eps").get_to(c.adam_eps);
    j.at("grad_clip").get_to(c.grad_clip);
    j.at("lambda_se").get_to(c.lambda_se);
    j.at("lambda_d").get_to(c.lambda_d);
    j.at("rho_min").get_to(c.rho_min);
    j.at("rho_max").get_to(c.rho_max);
    j.at("recon_weight").get_to(c.recon_weight);
    j.at("kl_weight").get_to(c.kl_weight);
    j.at("duration_weight").get_to(c.duration_weight);
    j.at("batch_size").get_to(c.batch_size);
    j.at("segment_frames").get_to(c.segment_frames);
    j.at("seed").get_to(c.seed);
    return c;
}

inline nlohmann::json audio_to_json(const SpectrogramConfig& c) {
    return {{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft},     {"hop", c.hop},
            {"win", c.win},                 {"mel_bins", c.mel_bins}, {"mel_fmin", c.mel_fmin},
            {"mel_fmax", c.mel_fmax},       {"log_floor", c.log_floor}};
}

inline SpectrogramConfig audio_from_json(const nlohmann::json& j) {
    SpectrogramConfig c;
    j.at("sample_rate").get_to(c.sample_rate);
    j.at("n_fft").get_to(c.n_fft);
    j.at("hop").get_to(c.hop);
    j.at("win").get_to(c.win);
    j.at("mel_bins").get_to(c.mel_bins);
    j.at("mel_fmin").get_to(c.mel_fmin);
    j.at("mel_fmax").get_to(c.mel_fmax);
    j.at("log_floor").get_to(c.log_floor);
    return c;
}

template <class T>
void put_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("checkpoint: truncated file");
    return v;
}

template <class S>
void put_tensor_data(std::ostream& os, const Tensor<S>& t) {
    os.write(reinterpret_cast<const char*>(t.v.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(S)));
}

template <class S>
void get_tensor_data(std::istream& is, Tensor<S>& t) {
    is.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(S)));
    if (!is) throw Error("checkpoint: truncated file");
}

}  // namespace ckpt_detail

template <class S>
void save_checkpoint(const std::string& path, TtsModel<S>& model, const CheckpointMeta& meta) {
    using namespace ckpt_detail;
    nlohmann::json j = {{"step", meta.step},
                        {"adam_t_gen", meta.adam_t_gen},
                        {"adam_t_disc", meta.adam_t_disc},
                        {"model", model_to_json(meta.model)},
                        {"train", train_to_json(meta.train)},
                        {"audio", audio_to_json(meta.audio)},
                        {"vocab", meta.vocab_symbols}};
    std::string js = j.dump();

    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("checkpoint: cannot write " + tmp);
        os.write(kCkptMagic, 8);
        put_raw(os, kCkptVersion);
        put_raw(os, static_cast<uint8_t>(sizeof(S)));
        put_raw(os, static_cast<uint64_t>(js.size()));
        os.write(js.data(), static_cast<std::streamsize>(js.size()));
        for (const auto& [name, p] : model.params()) {
            put_raw(os, static_cast<uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            put_raw(os, static_cast<uint32_t>(p->value.shape.size()));
            for (int d : p->value.shape) put_raw(os, static_cast<uint32_t>(d));
            put_tensor_data(os, p->value);
            put_tensor_data(os, p->adam_m);
            put_tensor_data(os, p->adam_v);
        }
        os.write(kCkptEnd, 8);
        if (!os) throw Error("checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("checkpoint: cannot move " + tmp + " into place");
}

template <class S>
struct LoadedCheckpoint {
    CheckpointMeta meta;
    TtsModel<S> model;
};

template <class S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("checkpoint: cannot open " + path);

    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kCkptMagic, 8))
        throw Error("checkpoint: not a checkpoint file: " + path);
    uint32_t version = get_raw<uint32_t>(is);
    if (version != kCkptVersion)
        throw Error("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                    std::to_string(kCkptVersion) + ")");
    uint8_t width = get_raw<uint8_t>(is);
    if (width != sizeof(S))
        throw Error("checkpoint: scalar width " + std::to_string(int(width)) +
                    " does not match this build (" + std::to_string(sizeof(S)) + ")");

    uint64_t jlen = get_raw<uint64_t>(is);
    std::string js(jlen, '\0');
    is.read(js.data(), static_cast<std::streamsize>(jlen));
    if (!is) throw Error("checkpoint: truncated file");
    nlohmann::json j = nlohmann::json::parse(js, nullptr, false);
    if (j.is_discarded()) throw Error("checkpoint: corrupt metadata");

    LoadedCheckpoint<S> out;
    out.meta.step = j.at("step").get<int64_t>();
    out.meta.adam_t_gen = j.at("adam_t_gen").get<int64_t>();
    out.meta.adam_t_disc = j.at("adam_t_disc").get<int64_t>();
    out.meta.model = model_from_json(j.at("model"));
    out.meta.train = train_from_json(j.at("train"));
    out.meta.audio = audio_from_json(j.at("audio"));
    out.meta.vocab_symbols = j.at("vocab").get<std::vector<std::string>>();

    out.model.init(out.meta.model, out.meta.train.seed);
    auto params = out.model.params();
    for (auto& [name, p] : params) {
        uint32_t nlen = get_raw<uint32_t>(is);
        std::string got(nlen, '\0');
        is.read(got.data(), nlen);
        if (!is) throw Error("checkpoint: truncated file");
        if (got != name)
            throw Error("checkpoint: parameter order mismatch: expected " + name + ", found " + got);
        uint32_t rank = get_raw<uint32_t>(is);
        std::vector<int> dims(rank);
        for (auto& d : dims) d = static_cast<int>(get_raw<uint32_t>(is));
        if (dims != p->value.shape)
            throw Error("checkpoint: shape mismatch for " + name);
        get_tensor_data(is, p->value);
        get_tensor_data(is, p->adam_m);
        get_tensor_data(is, p->adam_v);
    }
    char end[8];
    is.read(end, 8);
    if (!is || std::string(end, 8) != std::string(kCkptEnd, 8))
        throw Error("checkpoint: truncated file");
    return out;
}

}  // namespace voxflow
