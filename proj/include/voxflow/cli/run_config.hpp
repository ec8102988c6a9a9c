#pragma once

#include <string>
#include <vector>

#include "voxflow/audio/spectrogram.hpp"
#include "voxflow/model/config.hpp"
#include "voxflow/train/train_config.hpp"

namespace voxflow {

// Everything a run needs, merged from defaults, a config file (with optional
// `include` of a base profile), and command-line overrides — in that order.
// Keys are flat dotted names ("train.lr0"); unknown keys are rejected by name.
struct RunConfig {
    SpectrogramConfig audio;
    ModelConfig model;
    TrainConfig train;

    std::string data_manifest;
    std::string data_vocab;
    std::string data_eval_manifest;

    int64_t run_steps = 100;
    int64_t run_checkpoint_every = 0;  // 0: only the final checkpoint
    int64_t run_log_every = 1;
    std::string run_out_dir = "out";

    double tts_pace = 1.0;
    double tts_temperature = 0.667;

    std::vector<double> eval_sweep_lengths = {1, 2, 3, 5, 7, 10};
    std::string eval_asr_command;  // template with {} for the audio path
    bool eval_normalize = false;   // peak-normalize audio before embedding

    // Derived fields (spectrogram bins, vocabulary size) are not config keys.
    void finalize(int vocab_size);

    // Per-key validation messages name the offending key.
    void validate() const;
};

// One key=value assignment, in file order after include expansion.
struct ConfigEntry {
    std::string key;
    std::string value;
    std::string origin;  // "file:line" for error messages
};

// Reads a flat key=value file. Lines: blank, `# comment`, `include <path>`
// (relative to the including file), or `key = value`.
std::vector<ConfigEntry> read_config_file(const std::string& path);

// Applies one assignment; throws naming the key if unknown or malformed.
void apply_config_entry(RunConfig& cfg, const ConfigEntry& entry);

// Defaults + file + `key=value` override strings (later wins).
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);
RunConfig config_from_overrides(const std::vector<std::string>& overrides);

// Every key with its default and a one-line description, for --help.
std::string config_help_text();

// Current values in file syntax; re-reading reproduces the config.
std::string dump_config(const RunConfig& cfg);

}  // namespace voxflow
