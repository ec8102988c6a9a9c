// Command-line front end: train / tts / vc / eval / sweep / inspect.
// Exit codes: 0 success, 1 usage or config problems, 2 runtime failures.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "voxflow/cli/run_config.hpp"
#include "voxflow/data/dataset.hpp"
#include "voxflow/eval/eval.hpp"
#include "voxflow/eval/pca.hpp"
#include "voxflow/pipeline/synthesizer.hpp"
#include "voxflow/train/checkpoint.hpp"
#include "voxflow/train/trainer.hpp"

namespace {

using namespace voxflow;

using Scalar = float;

RunConfig merged_config(const std::string& config_path, const std::vector<std::string>& sets) {
    RunConfig cfg =
        config_path.empty() ? config_from_overrides(sets) : load_run_config(config_path, sets);
    return cfg;
}

std::string require_key(const std::string& value, const std::string& key) {
    if (value.empty()) throw Error("config: missing required key '" + key + "'");
    return value;
}

std::vector<std::string> phonemes_from(const std::string& text, const std::string& text_file) {
    std::string src = text;
    if (!text_file.empty()) {
        std::ifstream f(text_file);
        if (!f) throw Error("tts: cannot open text file " + text_file);
        std::ostringstream os;
        os << f.rdbuf();
        src = os.str();
    }
    std::vector<std::string> ph = tokenize_words(src);
    if (ph.empty()) throw Error("tts: no phoneme symbols given");
    return ph;
}

struct LoadedModel {
    CheckpointMeta meta;
    TtsModel<Scalar> model;
    Vocabulary vocab;
};

LoadedModel open_checkpoint(const std::string& path) {
    auto lc = load_checkpoint<Scalar>(path);
    Vocabulary vocab(lc.meta.vocab_symbols);
    return {std::move(lc.meta), std::move(lc.model), std::move(vocab)};
}

void peak_normalize(std::vector<float>& samples) {
    float peak = 0;
    for (float v : samples) peak = std::max(peak, std::abs(v));
    if (peak > 0)
        for (float& v : samples) v *= 0.95f / peak;
}

std::string stem_of(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

// --- train ---

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& resume) {
    RunConfig cfg = merged_config(config_path, sets);
    cfg.validate();

    Vocabulary vocab = Vocabulary::load(require_key(cfg.data_vocab, "data.vocab"));
    auto records = load_manifest(require_key(cfg.data_manifest, "data.manifest"));
    cfg.finalize(vocab.size());
    cfg.model.validate();
    Dataset<Scalar> dataset(std::move(records), vocab, cfg.audio);

    TtsModel<Scalar> model;
    model.init(cfg.model, cfg.train.seed);
    int64_t resume_step = 0, resume_gen = 0, resume_disc = 0;
    if (!resume.empty()) {
        auto lc = load_checkpoint<Scalar>(resume);
        // Compare only the audio/model/train sections (the dump covers every
        // configurable key; derived fields are not keys).
        RunConfig ours, theirs;
        ours.audio = cfg.audio, ours.model = cfg.model, ours.train = cfg.train;
        theirs.audio = lc.meta.audio, theirs.model = lc.meta.model, theirs.train = lc.meta.train;
        if (dump_config(ours) != dump_config(theirs))
            throw Error("train: checkpoint configuration does not match this run's config");
        if (lc.meta.vocab_symbols != vocab.symbols())
            throw Error("train: checkpoint vocabulary does not match " + cfg.data_vocab);
        model = std::move(lc.model);
        resume_step = lc.meta.step;
        resume_gen = lc.meta.adam_t_gen;
        resume_disc = lc.meta.adam_t_disc;
    }

    Trainer<Scalar> trainer(model, dataset, cfg.train);
    if (!resume.empty()) trainer.restore_counters(resume_step, resume_gen, resume_disc);

    std::filesystem::create_directories(cfg.run_out_dir);
    std::string metrics_path = cfg.run_out_dir + "/metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::app);
    if (!metrics) throw Error("train: cannot write " + metrics_path);

    auto save = [&](const std::string& name) {
        CheckpointMeta meta;
        meta.step = trainer.steps_done();
        meta.adam_t_gen = trainer.adam_steps_gen();
        meta.adam_t_disc = trainer.adam_steps_disc();
        meta.model = cfg.model;
        meta.train = cfg.train;
        meta.audio = cfg.audio;
        meta.vocab_symbols = vocab.symbols();
        save_checkpoint(cfg.run_out_dir + "/" + name, model, meta);
    };

    if (trainer.steps_done() >= cfg.run_steps)
        throw Error("train: checkpoint is already at step " +
                    std::to_string(trainer.steps_done()) + "; raise run.steps past it");

    while (trainer.steps_done() < cfg.run_steps) {
        LossReport r = trainer.step();
        if (r.step % cfg.run_log_every == 0) {
            metrics << metrics_json_line(r) << "\n";
            metrics.flush();
            std::cout << "step " << r.step << "  recon " << r.recon << "  kl " << r.kl
                      << "  dur " << r.duration << "  leak " << r.leakage << "  adv "
                      << r.adv_speaker << "  timbre " << r.timbre << "\n";
        }
        if (cfg.run_checkpoint_every > 0 && r.step % cfg.run_checkpoint_every == 0)
            save("checkpoint_" + std::to_string(r.step) + ".ckpt");
    }
    save("checkpoint.ckpt");
    std::cout << "trained to step " << trainer.steps_done() << "; checkpoint in "
              << cfg.run_out_dir << "\n";
    return 0;
}

// --- tts / vc ---

int cmd_tts(const std::string& ckpt_path, const std::string& config_path,
            const std::vector<std::string>& sets, const std::string& text,
            const std::string& text_file, const std::string& ref_path,
            const std::string& out_path, const std::string& batch_path, uint64_t seed,
            double pace_flag) {
    RunConfig cfg = merged_config(config_path, sets);
    LoadedModel lm = open_checkpoint(ckpt_path);
    Synthesizer<Scalar> syn(lm.model, lm.meta.audio, lm.vocab);
    double pace = pace_flag > 0 ? pace_flag : cfg.tts_pace;

    struct Request {
        std::string out, ref;
        std::vector<std::string> phonemes;
    };
    std::vector<Request> requests;
    if (!batch_path.empty()) {
        std::ifstream f(batch_path);
        if (!f) throw Error("tts: cannot open batch file " + batch_path);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            size_t p1 = line.find('|');
            size_t p2 = p1 == std::string::npos ? std::string::npos : line.find('|', p1 + 1);
            if (p2 == std::string::npos)
                throw Error("tts: batch line " + std::to_string(lineno) +
                            " needs out.wav|ref.wav|phonemes");
            Request r;
            r.out = line.substr(0, p1);
            r.ref = line.substr(p1 + 1, p2 - p1 - 1);
            r.phonemes = tokenize_words(line.substr(p2 + 1));
            if (r.out.empty() || r.ref.empty() || r.phonemes.empty())
                throw Error("tts: batch line " + std::to_string(lineno) + " has empty fields");
            requests.push_back(std::move(r));
        }
        if (requests.empty()) throw Error("tts: batch file has no requests");
    } else {
        requests.push_back({out_path, ref_path, phonemes_from(text, text_file)});
    }

    for (size_t i = 0; i < requests.size(); ++i) {
        const Request& r = requests[i];
        WavData ref = read_wav(r.ref);
        std::vector<float> wav = syn.tts(r.phonemes, ref.samples, ref.sample_rate,
                                         mix_seed(seed, static_cast<uint64_t>(i)), pace,
                                         cfg.tts_temperature);
        write_wav(r.out, wav, lm.meta.audio.sample_rate);
        std::cout << r.out << ": " << wav.size() << " samples ("
                  << static_cast<double>(wav.size()) / lm.meta.audio.sample_rate << " s)\n";
    }
    return 0;
}

int cmd_vc(const std::string& ckpt_path, const std::string& src_path, const std::string& ref_path,
           const std::string& out_path, const std::string& batch_path, uint64_t seed) {
    LoadedModel lm = open_checkpoint(ckpt_path);
    Synthesizer<Scalar> syn(lm.model, lm.meta.audio, lm.vocab);

    struct Request {
        std::string out, src, ref;
    };
    std::vector<Request> requests;
    if (!batch_path.empty()) {
        std::ifstream f(batch_path);
        if (!f) throw Error("vc: cannot open batch file " + batch_path);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            size_t p1 = line.find('|');
            size_t p2 = p1 == std::string::npos ? std::string::npos : line.find('|', p1 + 1);
            if (p2 == std::string::npos)
                throw Error("vc: batch line " + std::to_string(lineno) +
                            " needs out.wav|source.wav|ref.wav");
            requests.push_back({line.substr(0, p1), line.substr(p1 + 1, p2 - p1 - 1),
                                line.substr(p2 + 1)});
        }
        if (requests.empty()) throw Error("vc: batch file has no requests");
    } else {
        requests.push_back({out_path, src_path, ref_path});
    }

    for (size_t i = 0; i < requests.size(); ++i) {
        const Request& r = requests[i];
        WavData src = read_wav(r.src);
        WavData ref = read_wav(r.ref);
        std::vector<float> wav = syn.vc(src.samples, src.sample_rate, ref.samples, ref.sample_rate,
                                        mix_seed(seed, static_cast<uint64_t>(i)));
        write_wav(r.out, wav, lm.meta.audio.sample_rate);
        std::cout << r.out << ": " << wav.size() << " samples\n";
    }
    return 0;
}

// --- eval / sweep ---

struct EvalSet {
    std::vector<UtteranceRecord> records;
    std::vector<WavData> audio;
};

EvalSet load_eval_set(const std::string& manifest_path) {
    EvalSet s;
    s.records = load_manifest(manifest_path);
    for (const auto& r : s.records) s.audio.push_back(read_wav(r.audio_path));
    return s;
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path,
             const std::vector<std::string>& sets, const std::string& manifest_flag,
             const std::string& out_path, bool with_wer, const std::string& plot_path,
             uint64_t seed) {
    RunConfig cfg = merged_config(config_path, sets);
    LoadedModel lm = open_checkpoint(ckpt_path);
    Synthesizer<Scalar> syn(lm.model, lm.meta.audio, lm.vocab);
    std::string manifest_path =
        manifest_flag.empty() ? require_key(cfg.data_eval_manifest, "data.eval_manifest")
                              : manifest_flag;
    if (with_wer && cfg.eval_asr_command.empty())
        throw Error("eval: --wer requires the config key 'eval.asr_command'");

    EvalSet es = load_eval_set(manifest_path);
    Embedder embed = [&](const EvalUtterance& u) {
        if (cfg.eval_normalize) {
            std::vector<float> s = u.samples;
            peak_normalize(s);
            return syn.embed_audio(s, u.sample_rate);
        }
        return syn.embed_audio(u.samples, u.sample_rate);
    };

    std::filesystem::create_directories(cfg.run_out_dir);
    std::vector<EvalUtterance> synth_set, ref_set;
    std::vector<std::string> synth_paths, expected;
    for (size_t i = 0; i < es.records.size(); ++i) {
        const auto& rec = es.records[i];
        const auto& gt = es.audio[i];
        std::vector<float> wav =
            syn.tts(rec.phonemes, gt.samples, gt.sample_rate, mix_seed(seed, i));
        std::string id = stem_of(rec.audio_path);
        std::string path = cfg.run_out_dir + "/eval_" + id + ".wav";
        write_wav(path, wav, lm.meta.audio.sample_rate);
        synth_paths.push_back(path);
        std::ostringstream text;
        for (size_t k = 0; k < rec.phonemes.size(); ++k)
            text << (k ? " " : "") << rec.phonemes[k];
        expected.push_back(text.str());
        synth_set.push_back({id, std::move(wav), lm.meta.audio.sample_rate});
        ref_set.push_back({id, gt.samples, gt.sample_rate});
    }

    SimilarityResult sim = smcs(synth_set, ref_set, embed);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw Error("eval: cannot write " + out_path);
        os = &file;
    }
    os->precision(10);
    for (const auto& [id, c] : sim.pairs) *os << "pair " << id << " " << c << "\n";
    *os << "mean_smcs " << sim.mean << "\n";
    *os << "ci95 " << sim.ci95 << (sim.degenerate_ci ? " (single pair)" : "") << "\n";
    if (with_wer) *os << "wer " << wer_hook(expected, synth_paths, cfg.eval_asr_command) << "\n";

    if (!plot_path.empty()) {
        std::vector<std::string> labels;
        std::vector<std::vector<double>> vecs;
        for (size_t i = 0; i < synth_set.size(); ++i) {
            labels.push_back(es.records[i].speaker_id + "_synth_" + synth_set[i].id);
            vecs.push_back(embed(synth_set[i]));
            labels.push_back(es.records[i].speaker_id + "_ref_" + ref_set[i].id);
            vecs.push_back(embed(ref_set[i]));
        }
        PcaProjection p = emit_embedding_plot_data(labels, vecs, plot_path);
        if (p.degenerate) std::cerr << "warning: embeddings have no variance; plot is degenerate\n";
    }
    return 0;
}

int cmd_sweep(const std::string& ckpt_path, const std::string& config_path,
              const std::vector<std::string>& sets, const std::string& manifest_flag,
              const std::string& out_path, uint64_t seed) {
    RunConfig cfg = merged_config(config_path, sets);
    LoadedModel lm = open_checkpoint(ckpt_path);
    Synthesizer<Scalar> syn(lm.model, lm.meta.audio, lm.vocab);
    std::string manifest_path =
        manifest_flag.empty() ? require_key(cfg.data_eval_manifest, "data.eval_manifest")
                              : manifest_flag;
    EvalSet es = load_eval_set(manifest_path);

    std::vector<SweepItem> items;
    for (size_t i = 0; i < es.records.size(); ++i) {
        SweepItem it;
        it.phonemes = es.records[i].phonemes;
        it.reference = {stem_of(es.records[i].audio_path), es.audio[i].samples,
                        es.audio[i].sample_rate};
        items.push_back(std::move(it));
    }
    Embedder embed = [&](const EvalUtterance& u) { return syn.embed_audio(u.samples, u.sample_rate); };
    auto rows = reference_length_sweep(syn, items, cfg.eval_sweep_lengths, embed, seed, &std::cerr);

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw Error("sweep: cannot write " + out_path);
        os = &file;
    }
    os->precision(10);
    for (const auto& r : rows)
        *os << "length " << r.length_s << " mean_smcs " << r.mean_smcs << " used " << r.used
            << " skipped " << r.skipped << "\n";
    return 0;
}

// --- inspect ---

int cmd_inspect(const std::string& ckpt_path, const std::string& config_path,
                const std::vector<std::string>& sets) {
    if (ckpt_path.empty() && config_path.empty() && sets.empty())
        throw Error("config: inspect needs --checkpoint or --config");
    if (!ckpt_path.empty()) {
        LoadedModel lm = open_checkpoint(ckpt_path);
        int64_t n_params = 0;
        auto refs = lm.model.params();
        for (auto& [name, p] : refs) n_params += p->value.numel();
        std::cout << "checkpoint " << ckpt_path << "\n"
                  << "  step " << lm.meta.step << " (optimizer " << lm.meta.adam_t_gen << " gen / "
                  << lm.meta.adam_t_disc << " disc)\n"
                  << "  parameters " << n_params << "\n"
                  << "  audio " << lm.meta.audio.sample_rate << " Hz, hop " << lm.meta.audio.hop
                  << ", " << lm.meta.audio.bins() << " bins\n"
                  << "  latent " << lm.meta.model.d_latent << ", speaker dim "
                  << lm.meta.model.d_spk << ", vocabulary " << lm.vocab.size() << "\n";
    }
    if (!config_path.empty() || !sets.empty()) {
        RunConfig cfg = merged_config(config_path, sets);
        cfg.validate();
        std::cout << dump_config(cfg);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voxflow: zero-shot speaker-adaptive speech synthesis and voice conversion"};
    app.require_subcommand(1);
    app.footer(config_help_text());

    std::string config_path, resume, ckpt, text, text_file, ref_path, src_path, out_path,
        batch_path, manifest_path, plot_path;
    std::vector<std::string> sets;
    uint64_t seed = 0;
    double pace_flag = 0;
    bool with_wer = false;

    auto add_sets = [&](CLI::App* c) {
        c->add_option("--set", sets, "override a config key, e.g. --set train.lr0=1e-4");
    };

    CLI::App* train = app.add_subcommand("train", "optimize a model on a manifest");
    train->add_option("--config", config_path, "config file (see key list below)")->required();
    train->add_option("--resume", resume, "checkpoint to continue from");
    add_sets(train);

    CLI::App* tts = app.add_subcommand("tts", "synthesize speech from phonemes");
    tts->add_option("--checkpoint", ckpt, "trained model")->required();
    tts->add_option("--config", config_path, "optional config for tts.* keys");
    tts->add_option("--text", text, "space-separated phoneme symbols");
    tts->add_option("--text-file", text_file, "file of phoneme symbols");
    tts->add_option("--ref", ref_path, "reference speaker audio (>= 0.5 s)");
    tts->add_option("--out", out_path, "output WAV path");
    tts->add_option("--batch", batch_path, "batch file: out.wav|ref.wav|phonemes per line");
    tts->add_option("--seed", seed, "sampling seed");
    tts->add_option("--pace", pace_flag, "duration multiplier (overrides tts.pace)");
    add_sets(tts);

    CLI::App* vc = app.add_subcommand("vc", "convert a source voice to a reference voice");
    vc->add_option("--checkpoint", ckpt, "trained model")->required();
    vc->add_option("--source", src_path, "source audio to convert");
    vc->add_option("--ref", ref_path, "reference speaker audio");
    vc->add_option("--out", out_path, "output WAV path");
    vc->add_option("--batch", batch_path, "batch file: out.wav|source.wav|ref.wav per line");
    vc->add_option("--seed", seed, "sampling seed");

    CLI::App* eval = app.add_subcommand("eval", "similarity (and optional intelligibility) report");
    eval->add_option("--checkpoint", ckpt, "trained model")->required();
    eval->add_option("--config", config_path, "optional config for eval.* keys");
    eval->add_option("--manifest", manifest_path, "eval manifest (else data.eval_manifest)");
    eval->add_option("--out", out_path, "results file (default stdout)");
    eval->add_option("--plot", plot_path, "write 2-D embedding plot data here");
    eval->add_flag("--wer", with_wer, "run the recognizer from eval.asr_command");
    eval->add_option("--seed", seed, "sampling seed");
    add_sets(eval);

    CLI::App* sweep = app.add_subcommand("sweep", "similarity vs. reference length");
    sweep->add_option("--checkpoint", ckpt, "trained model")->required();
    sweep->add_option("--config", config_path, "optional config for eval.sweep_lengths");
    sweep->add_option("--manifest", manifest_path, "eval manifest (else data.eval_manifest)");
    sweep->add_option("--out", out_path, "results file (default stdout)");
    sweep->add_option("--seed", seed, "sampling seed");
    add_sets(sweep);

    CLI::App* inspect = app.add_subcommand("inspect", "describe a checkpoint or a merged config");
    inspect->add_option("--checkpoint", ckpt, "checkpoint to describe");
    inspect->add_option("--config", config_path, "config to merge and print");
    add_sets(inspect);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, sets, resume);
        if (tts->parsed())
            return cmd_tts(ckpt, config_path, sets, text, text_file, ref_path, out_path,
                           batch_path, seed, pace_flag);
        if (vc->parsed()) return cmd_vc(ckpt, src_path, ref_path, out_path, batch_path, seed);
        if (eval->parsed())
            return cmd_eval(ckpt, config_path, sets, manifest_path, out_path, with_wer, plot_path,
                            seed);
        if (sweep->parsed()) return cmd_sweep(ckpt, config_path, sets, manifest_path, out_path, seed);
        if (inspect->parsed()) return cmd_inspect(ckpt, config_path, sets);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return std::string(e.what()).rfind("config:", 0) == 0 ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
