#include "voxflow/cli/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

namespace voxflow {

namespace {

using FieldRef = std::variant<int*, int64_t*, uint64_t*, double*, bool*, std::string*,
                              std::vector<int>*, std::vector<double>*>;

struct SchemaEntry {
    const char* key;
    FieldRef (*ref)(RunConfig&);
    const char* help;
};

// The single source of truth binding key names to fields.
const SchemaEntry kSchema[] = {
    {"audio.sample_rate", [](RunConfig& c) -> FieldRef { return &c.audio.sample_rate; },
     "working sample rate in Hz; inputs are resampled to this"},
    {"audio.n_fft", [](RunConfig& c) -> FieldRef { return &c.audio.n_fft; },
     "FFT size (power of two); spectrogram has n_fft/2+1 bins"},
    {"audio.hop", [](RunConfig& c) -> FieldRef { return &c.audio.hop; },
     "frame hop in samples; must equal the decoder upsampling product"},
    {"audio.win", [](RunConfig& c) -> FieldRef { return &c.audio.win; }, "analysis window length"},
    {"audio.mel_bins", [](RunConfig& c) -> FieldRef { return &c.audio.mel_bins; },
     "mel bands for the reconstruction loss"},
    {"audio.mel_fmin", [](RunConfig& c) -> FieldRef { return &c.audio.mel_fmin; },
     "mel filterbank lower edge in Hz"},
    {"audio.mel_fmax", [](RunConfig& c) -> FieldRef { return &c.audio.mel_fmax; },
     "mel filterbank upper edge in Hz"},
    {"audio.log_floor", [](RunConfig& c) -> FieldRef { return &c.audio.log_floor; },
     "clamp before the log in log-mel"},

    {"model.d_latent", [](RunConfig& c) -> FieldRef { return &c.model.d_latent; },
     "acoustic latent channels (even)"},
    {"model.d_spk", [](RunConfig& c) -> FieldRef { return &c.model.d_spk; },
     "speaker embedding dimension"},
    {"model.hidden", [](RunConfig& c) -> FieldRef { return &c.model.hidden; },
     "posterior encoder width"},
    {"model.post_layers", [](RunConfig& c) -> FieldRef { return &c.model.post_layers; },
     "posterior encoder residual blocks"},
    {"model.post_kernel", [](RunConfig& c) -> FieldRef { return &c.model.post_kernel; },
     "posterior encoder kernel size"},
    {"model.text_hidden", [](RunConfig& c) -> FieldRef { return &c.model.text_hidden; },
     "phoneme encoder width (divisible by heads)"},
    {"model.text_layers", [](RunConfig& c) -> FieldRef { return &c.model.text_layers; },
     "phoneme encoder transformer blocks"},
    {"model.text_heads", [](RunConfig& c) -> FieldRef { return &c.model.text_heads; },
     "attention heads in the phoneme encoder"},
    {"model.text_ffn", [](RunConfig& c) -> FieldRef { return &c.model.text_ffn; },
     "feed-forward width in the phoneme encoder"},
    {"model.rel_window", [](RunConfig& c) -> FieldRef { return &c.model.rel_window; },
     "relative-position window for attention"},
    {"model.dp_hidden", [](RunConfig& c) -> FieldRef { return &c.model.dp_hidden; },
     "duration predictor width"},
    {"model.flow_layers", [](RunConfig& c) -> FieldRef { return &c.model.flow_layers; },
     "coupling layers in the timbre flow (even)"},
    {"model.flow_hidden", [](RunConfig& c) -> FieldRef { return &c.model.flow_hidden; },
     "channels inside each coupling conditioner"},
    {"model.flow_kernel", [](RunConfig& c) -> FieldRef { return &c.model.flow_kernel; },
     "conditioner kernel size"},
    {"model.flow_depth", [](RunConfig& c) -> FieldRef { return &c.model.flow_depth; },
     "dilated conv layers per conditioner"},
    {"model.flow_log_scale_clamp",
     [](RunConfig& c) -> FieldRef { return &c.model.flow_log_scale_clamp; },
     "bound on coupling log-scales"},
    {"model.dec_factors", [](RunConfig& c) -> FieldRef { return &c.model.dec_factors; },
     "decoder upsample factors (comma-separated; product = audio.hop)"},
    {"model.dec_channels", [](RunConfig& c) -> FieldRef { return &c.model.dec_channels; },
     "decoder initial channels"},
    {"model.spk_channels", [](RunConfig& c) -> FieldRef { return &c.model.spk_channels; },
     "speaker encoder channels"},
    {"model.res2_scale", [](RunConfig& c) -> FieldRef { return &c.model.res2_scale; },
     "multi-scale split factor in residual blocks"},
    {"model.dt_channels", [](RunConfig& c) -> FieldRef { return &c.model.dt_channels; },
     "timbre discriminator channels"},
    {"model.speaker_input_spectrogram",
     [](RunConfig& c) -> FieldRef { return &c.model.speaker_input_spectrogram; },
     "ablation: feed the speaker encoder spectrograms instead of latents"},

    {"train.lr0", [](RunConfig& c) -> FieldRef { return &c.train.lr0; },
     "initial AdamW learning rate"},
    {"train.lr_gamma", [](RunConfig& c) -> FieldRef { return &c.train.lr_gamma; },
     "per-epoch learning-rate decay factor"},
    {"train.beta1", [](RunConfig& c) -> FieldRef { return &c.train.beta1; }, "AdamW beta1"},
    {"train.beta2", [](RunConfig& c) -> FieldRef { return &c.train.beta2; }, "AdamW beta2"},
    {"train.weight_decay", [](RunConfig& c) -> FieldRef { return &c.train.weight_decay; },
     "decoupled weight decay"},
    {"train.adam_eps", [](RunConfig& c) -> FieldRef { return &c.train.adam_eps; },
     "AdamW denominator epsilon"},
    {"train.grad_clip", [](RunConfig& c) -> FieldRef { return &c.train.grad_clip; },
     "global-norm gradient clip per optimizer"},
    {"train.lambda_se", [](RunConfig& c) -> FieldRef { return &c.train.lambda_se; },
     "weight of the speaker-leakage adversarial term"},
    {"train.lambda_d", [](RunConfig& c) -> FieldRef { return &c.train.lambda_d; },
     "gradient-reversal scale for the timbre-residual term"},
    {"train.rho_min", [](RunConfig& c) -> FieldRef { return &c.train.rho_min; },
     "minimum overlap ratio for reference splits"},
    {"train.rho_max", [](RunConfig& c) -> FieldRef { return &c.train.rho_max; },
     "maximum overlap ratio for reference splits"},
    {"train.recon_weight", [](RunConfig& c) -> FieldRef { return &c.train.recon_weight; },
     "mel reconstruction weight"},
    {"train.kl_weight", [](RunConfig& c) -> FieldRef { return &c.train.kl_weight; },
     "prior-matching weight"},
    {"train.duration_weight", [](RunConfig& c) -> FieldRef { return &c.train.duration_weight; },
     "duration regression weight"},
    {"train.batch_size", [](RunConfig& c) -> FieldRef { return &c.train.batch_size; },
     "utterances per step"},
    {"train.segment_frames", [](RunConfig& c) -> FieldRef { return &c.train.segment_frames; },
     "latent frames decoded per reconstruction segment"},
    {"train.seed", [](RunConfig& c) -> FieldRef { return &c.train.seed; },
     "root seed for init, shuffling, and noise"},

    {"data.manifest", [](RunConfig& c) -> FieldRef { return &c.data_manifest; },
     "training manifest: path|speaker|phonemes per line"},
    {"data.vocab", [](RunConfig& c) -> FieldRef { return &c.data_vocab; },
     "phoneme vocabulary file, one symbol per line"},
    {"data.eval_manifest", [](RunConfig& c) -> FieldRef { return &c.data_eval_manifest; },
     "held-out manifest for evaluation"},

    {"run.steps", [](RunConfig& c) -> FieldRef { return &c.run_steps; },
     "total optimization steps for this run"},
    {"run.checkpoint_every", [](RunConfig& c) -> FieldRef { return &c.run_checkpoint_every; },
     "periodic checkpoint interval in steps (0: final only)"},
    {"run.log_every", [](RunConfig& c) -> FieldRef { return &c.run_log_every; },
     "metric-log interval in steps"},
    {"run.out_dir", [](RunConfig& c) -> FieldRef { return &c.run_out_dir; },
     "directory for checkpoints and metric logs"},

    {"tts.pace", [](RunConfig& c) -> FieldRef { return &c.tts_pace; },
     "duration multiplier for synthesis"},
    {"tts.temperature", [](RunConfig& c) -> FieldRef { return &c.tts_temperature; },
     "prior sampling temperature for synthesis"},

    {"eval.sweep_lengths", [](RunConfig& c) -> FieldRef { return &c.eval_sweep_lengths; },
     "reference lengths in seconds for the length sweep (comma-separated)"},
    {"eval.asr_command", [](RunConfig& c) -> FieldRef { return &c.eval_asr_command; },
     "recognizer command template for the intelligibility metric ({} = audio path)"},
    {"eval.normalize", [](RunConfig& c) -> FieldRef { return &c.eval_normalize; },
     "peak-normalize audio before computing embeddings"},
};

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const ConfigEntry& e, const std::string& want) {
    std::string where = e.origin.empty() ? "" : " (" + e.origin + ")";
    throw Error("config: key '" + e.key + "' expects " + want + ", got '" + e.value + "'" + where);
}

int64_t parse_integer(const ConfigEntry& e) {
    const char* s = e.value.c_str();
    char* end = nullptr;
    long long v = std::strtoll(s, &end, 10);
    if (end == s || *end != '\0') bad_value(e, "an integer");
    return v;
}

double parse_real(const ConfigEntry& e) {
    const char* s = e.value.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0') bad_value(e, "a number");
    return v;
}

bool parse_flag(const ConfigEntry& e) {
    if (e.value == "true" || e.value == "1" || e.value == "on") return true;
    if (e.value == "false" || e.value == "0" || e.value == "off") return false;
    bad_value(e, "a boolean (true/false)");
}

template <class T, class ParseOne>
std::vector<T> parse_list(const ConfigEntry& e, ParseOne parse_one) {
    std::vector<T> out;
    std::string rest = e.value;
    size_t pos = 0;
    while (pos <= rest.size()) {
        size_t comma = rest.find(',', pos);
        std::string tok = trim(rest.substr(pos, comma == std::string::npos ? comma : comma - pos));
        if (tok.empty()) bad_value(e, "a comma-separated list");
        ConfigEntry sub{e.key, tok, e.origin};
        out.push_back(parse_one(sub));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

void assign(FieldRef ref, const ConfigEntry& e) {
    std::visit(
        [&](auto* field) {
            using T = std::remove_pointer_t<decltype(field)>;
            if constexpr (std::is_same_v<T, int>) {
                int64_t v = parse_integer(e);
                if (v < INT32_MIN || v > INT32_MAX) bad_value(e, "a 32-bit integer");
                *field = static_cast<int>(v);
            } else if constexpr (std::is_same_v<T, int64_t>) {
                *field = parse_integer(e);
            } else if constexpr (std::is_same_v<T, uint64_t>) {
                int64_t v = parse_integer(e);
                if (v < 0) bad_value(e, "a non-negative integer");
                *field = static_cast<uint64_t>(v);
            } else if constexpr (std::is_same_v<T, double>) {
                *field = parse_real(e);
            } else if constexpr (std::is_same_v<T, bool>) {
                *field = parse_flag(e);
            } else if constexpr (std::is_same_v<T, std::string>) {
                *field = e.value;
            } else if constexpr (std::is_same_v<T, std::vector<int>>) {
                *field = parse_list<int>(e, [](const ConfigEntry& s) {
                    return static_cast<int>(parse_integer(s));
                });
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                *field = parse_list<double>(e, [](const ConfigEntry& s) { return parse_real(s); });
            }
        },
        ref);
}

std::string render(const RunConfig& cfg, const SchemaEntry& entry) {
    FieldRef ref = entry.ref(const_cast<RunConfig&>(cfg));
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](auto* field) {
            using T = std::remove_pointer_t<decltype(field)>;
            if constexpr (std::is_same_v<T, bool>) {
                os << (*field ? "true" : "false");
            } else if constexpr (std::is_same_v<T, std::vector<int>> ||
                                 std::is_same_v<T, std::vector<double>>) {
                for (size_t i = 0; i < field->size(); ++i) os << (i ? "," : "") << (*field)[i];
            } else {
                os << *field;
            }
        },
        ref);
    return os.str();
}

void read_config_into(const std::string& path, std::vector<ConfigEntry>& out, int depth) {
    if (depth > 16) throw Error("config: include depth exceeded at " + path);
    std::ifstream f(path);
    if (!f) throw Error("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::string origin = path + ":" + std::to_string(lineno);
        if (s.rfind("include ", 0) == 0) {
            std::string inc = trim(s.substr(8));
            if (inc.empty()) throw Error("config: empty include at " + origin);
            std::filesystem::path p(inc);
            if (p.is_relative()) p = std::filesystem::path(path).parent_path() / p;
            read_config_into(p.string(), out, depth + 1);
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw Error("config: expected key = value at " + origin + ": " + s);
        ConfigEntry e{trim(s.substr(0, eq)), trim(s.substr(eq + 1)), origin};
        if (e.key.empty()) throw Error("config: empty key at " + origin);
        out.push_back(std::move(e));
    }
}

}  // namespace

std::vector<ConfigEntry> read_config_file(const std::string& path) {
    std::vector<ConfigEntry> out;
    read_config_into(path, out, 0);
    return out;
}

void apply_config_entry(RunConfig& cfg, const ConfigEntry& entry) {
    for (const auto& s : kSchema) {
        if (entry.key == s.key) {
            assign(s.ref(cfg), entry);
            return;
        }
    }
    std::string where = entry.origin.empty() ? "" : " (" + entry.origin + ")";
    throw Error("config: unknown key '" + entry.key + "'" + where);
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    for (const auto& e : read_config_file(path)) apply_config_entry(cfg, e);
    for (const auto& o : overrides) {
        size_t eq = o.find('=');
        if (eq == std::string::npos)
            throw Error("config: override must be key=value, got '" + o + "'");
        apply_config_entry(cfg, {trim(o.substr(0, eq)), trim(o.substr(eq + 1)), "command line"});
    }
    return cfg;
}

RunConfig config_from_overrides(const std::vector<std::string>& overrides) {
    RunConfig cfg;
    for (const auto& o : overrides) {
        size_t eq = o.find('=');
        if (eq == std::string::npos)
            throw Error("config: override must be key=value, got '" + o + "'");
        apply_config_entry(cfg, {trim(o.substr(0, eq)), trim(o.substr(eq + 1)), "command line"});
    }
    return cfg;
}

std::string config_help_text() {
    RunConfig defaults;
    std::ostringstream os;
    os << "Config keys (key = default):\n";
    for (const auto& s : kSchema) {
        std::string v = render(defaults, s);
        os << "  " << s.key << " = " << (v.empty() ? "(unset)" : v) << "\n      " << s.help << "\n";
    }
    return os.str();
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& s : kSchema) os << s.key << " = " << render(cfg, s) << "\n";
    return os.str();
}

void RunConfig::finalize(int vocab_size) {
    model.spec_bins = audio.bins();
    model.vocab_size = vocab_size;
}

void RunConfig::validate() const {
    audio.validate();
    train.validate();
    if (model.upsample_total() != audio.hop)
        throw Error("config: model.dec_factors product " + std::to_string(model.upsample_total()) +
                    " must equal audio.hop " + std::to_string(audio.hop));
    if (run_steps < 1) throw Error("config: run.steps must be >= 1");
    if (run_checkpoint_every < 0) throw Error("config: run.checkpoint_every must be >= 0");
    if (run_log_every < 1) throw Error("config: run.log_every must be >= 1");
    if (!(tts_pace > 0)) throw Error("config: tts.pace must be positive");
    if (!(tts_temperature >= 0)) throw Error("config: tts.temperature must be >= 0");
    for (double L : eval_sweep_lengths)
        if (!(L > 0)) throw Error("config: eval.sweep_lengths must be positive");
}

}  // namespace voxflow
