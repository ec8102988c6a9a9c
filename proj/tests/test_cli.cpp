#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support/fixture.hpp"
#include "voxflow/audio/wav.hpp"
#include "voxflow/cli/run_config.hpp"
#include "voxflow/eval/eval.hpp"

using namespace voxflow;

namespace {

std::string temp_dir(const std::string& leaf) {
    std::string d = (std::filesystem::temp_directory_path() / leaf).string();
    std::filesystem::create_directories(d);
    return d;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    REQUIRE(f.good());
    f << text;
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

int line_count(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

CommandResult vox(const std::string& args) {
    return run_command_capture(std::string(VOX_BIN) + " " + args);
}

struct CliWorld {
    voxfix::Fixture fx;
    std::string dir;
    std::string base_cfg;  // toy preset + fixture paths, no run.* overrides
};

CliWorld& world() {
    static CliWorld* w = [] {
        auto* o = new CliWorld;
        // Start from a clean slate: metrics files append across runs, so
        // leftovers from a previous suite invocation would skew row counts.
        std::filesystem::remove_all(std::filesystem::temp_directory_path() / "vox_cli");
        o->dir = temp_dir("vox_cli");
        voxfix::FixtureSpec fs;
        fs.utts_per_speaker = 2;
        o->fx = voxfix::build_fixture(o->dir + "/fixture", voxfix::mini_audio(), fs);
        o->base_cfg = o->dir + "/base.cfg";
        write_text(o->base_cfg, "include " + std::string(VOX_PRESETS) +
                                    "/toy.cfg\n"
                                    "data.manifest = " +
                                    o->fx.manifest_path + "\ndata.vocab = " + o->fx.vocab_path +
                                    "\ntrain.batch_size = 2\n");
        return o;
    }();
    return *w;
}

// Trains once (10 steps); later tests reuse the checkpoint.
const std::string& trained_checkpoint() {
    static std::string path = [] {
        auto& w = world();
        std::string out = w.dir + "/train10";
        std::string cfg = w.dir + "/train10.cfg";
        write_text(cfg, "include " + w.base_cfg + "\nrun.steps = 10\nrun.out_dir = " + out + "\n");
        CommandResult r = vox("train --config " + cfg);
        REQUIRE(r.exit_code == 0);
        REQUIRE(std::filesystem::exists(out + "/checkpoint.ckpt"));
        return out + "/checkpoint.ckpt";
    }();
    return path;
}

}  // namespace

TEST_CASE("config: include chain, precedence, and overrides") {
    auto& w = world();
    std::string child = w.dir + "/child.cfg";
    write_text(child, "# comment line\n\ninclude " + w.base_cfg +
                          "\ntrain.batch_size = 3\naudio.mel_bins = 21\n");
    RunConfig cfg = load_run_config(child, {"audio.mel_bins=22"});
    CHECK(cfg.audio.sample_rate == 8000);     // from the preset via two includes
    CHECK(cfg.model.d_latent == 8);           // preset
    CHECK(cfg.train.batch_size == 3);         // later file line beats included value
    CHECK(cfg.audio.mel_bins == 22);          // command line beats file
    CHECK(cfg.data_manifest == w.fx.manifest_path);
    CHECK(cfg.train.lr0 == 2e-4);             // untouched default
    cfg.validate();
}

TEST_CASE("config: unknown keys and malformed values name the offender") {
    auto& w = world();
    std::string bad = w.dir + "/bad.cfg";
    write_text(bad, "train.learning_rate = 1\n");
    try {
        load_run_config(bad, {});
        FAIL("expected unknown-key error");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("train.learning_rate") != std::string::npos);
        CHECK(msg.find("bad.cfg:1") != std::string::npos);
    }

    write_text(bad, "train.lr0 = fast\n");
    try {
        load_run_config(bad, {});
        FAIL("expected value error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("train.lr0") != std::string::npos);
    }

    write_text(bad, "eval.normalize = maybe\n");
    CHECK_THROWS_AS(load_run_config(bad, {}), Error);
    write_text(bad, "model.dec_factors = 4,,4\n");
    CHECK_THROWS_AS(load_run_config(bad, {}), Error);
    write_text(bad, "no_equals_sign\n");
    CHECK_THROWS_AS(load_run_config(bad, {}), Error);
    CHECK_THROWS_AS(load_run_config(w.dir + "/missing.cfg", {}), Error);
    CHECK_THROWS_AS(load_run_config(w.base_cfg, {"train.lr0"}), Error);  // no '='
}

TEST_CASE("config: include cycles are cut off") {
    auto& w = world();
    std::string a = w.dir + "/cycle_a.cfg";
    std::string b = w.dir + "/cycle_b.cfg";
    write_text(a, "include cycle_b.cfg\n");
    write_text(b, "include cycle_a.cfg\n");
    try {
        load_run_config(a, {});
        FAIL("expected depth error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("depth") != std::string::npos);
    }
}

TEST_CASE("config: dump round-trips through the parser") {
    RunConfig cfg;
    cfg.audio.sample_rate = 8000;
    cfg.audio.n_fft = 256;
    cfg.audio.hop = 64;
    cfg.audio.win = 256;
    cfg.model.dec_factors = {4, 4, 4};
    cfg.train.lr0 = 3.5e-4;
    cfg.train.seed = 99;
    cfg.eval_sweep_lengths = {0.75, 2.0};
    cfg.data_manifest = "some/where.txt";
    cfg.eval_normalize = true;

    std::string path = temp_dir("vox_cli") + "/dump.cfg";
    write_text(path, dump_config(cfg));
    RunConfig back = load_run_config(path, {});
    CHECK(dump_config(back) == dump_config(cfg));
    CHECK(back.train.lr0 == cfg.train.lr0);
    CHECK(back.eval_sweep_lengths == cfg.eval_sweep_lengths);
    CHECK(back.eval_normalize == true);
}

TEST_CASE("config: shipped presets parse and validate") {
    for (std::string name : {"toy.cfg", "full.cfg"}) {
        RunConfig cfg = load_run_config(std::string(VOX_PRESETS) + "/" + name, {});
        cfg.validate();
        CHECK(cfg.model.upsample_total() == cfg.audio.hop);
    }
    RunConfig toy = load_run_config(std::string(VOX_PRESETS) + "/toy.cfg", {});
    CHECK(toy.audio.sample_rate == 8000);
    RunConfig full = load_run_config(std::string(VOX_PRESETS) + "/full.cfg", {});
    CHECK(full.audio.sample_rate == 22050);
    CHECK(full.model.d_latent == 192);
    CHECK(full.train.batch_size == 64);
}

TEST_CASE("config: validation names the offending key") {
    RunConfig cfg = load_run_config(std::string(VOX_PRESETS) + "/toy.cfg", {"run.steps=0"});
    try {
        cfg.validate();
        FAIL("expected validation error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("run.steps") != std::string::npos);
    }
    cfg = load_run_config(std::string(VOX_PRESETS) + "/toy.cfg", {"audio.hop=32"});
    CHECK_THROWS_AS(cfg.validate(), Error);  // dec_factors product mismatch
}

TEST_CASE("config: help text covers every key exactly as dumped") {
    std::string help = config_help_text();
    std::istringstream dump(dump_config(RunConfig{}));
    std::string line;
    int keys = 0;
    while (std::getline(dump, line)) {
        std::string key = line.substr(0, line.find(' '));
        CHECK(help.find(key + " = ") != std::string::npos);
        ++keys;
    }
    CHECK(keys > 50);
}

TEST_CASE("cli: train writes a checkpoint and one metrics row per step") {
    auto& w = world();
    const std::string& ckpt = trained_checkpoint();
    CHECK(std::filesystem::exists(ckpt));
    std::string metrics = read_text(w.dir + "/train10/metrics.jsonl");
    CHECK(line_count(metrics) == 10);
    CHECK(metrics.find("\"step\":1,") != std::string::npos);
    CHECK(metrics.find("\"step\":10,") != std::string::npos);
    CHECK(metrics.find("\"recon\":") != std::string::npos);
}

TEST_CASE("cli: resumed training reproduces an unbroken run's metrics exactly") {
    auto& w = world();

    std::string cfg_a = w.dir + "/resume_a.cfg";
    write_text(cfg_a, "include " + w.base_cfg + "\nrun.steps = 6\nrun.out_dir = " + w.dir +
                          "/resume_a\n");
    CommandResult a1 = vox("train --config " + cfg_a);
    REQUIRE(a1.exit_code == 0);

    CommandResult a2 = vox("train --config " + cfg_a + " --set run.steps=10 --resume " + w.dir +
                           "/resume_a/checkpoint.ckpt");
    REQUIRE(a2.exit_code == 0);

    std::string cfg_b = w.dir + "/resume_b.cfg";
    write_text(cfg_b, "include " + w.base_cfg + "\nrun.steps = 10\nrun.out_dir = " + w.dir +
                          "/resume_b\n");
    CommandResult b = vox("train --config " + cfg_b);
    REQUIRE(b.exit_code == 0);

    std::string ma = read_text(w.dir + "/resume_a/metrics.jsonl");
    std::string mb = read_text(w.dir + "/resume_b/metrics.jsonl");
    CHECK(line_count(ma) == 10);  // 6 rows, then rows 7..10 appended
    CHECK(ma == mb);
    CHECK(ma.find("\"step\":7,") != std::string::npos);
}

TEST_CASE("cli: resume rejects a checkpoint from a different configuration") {
    auto& w = world();
    CommandResult r = vox("train --config " + w.dir + "/train10.cfg --set run.steps=12" +
                          " --set model.d_latent=16 --resume " + trained_checkpoint());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("does not match") != std::string::npos);
}

TEST_CASE("cli: unknown config key exits with code 1 naming the key") {
    auto& w = world();
    std::string cfg = w.dir + "/unknown.cfg";
    write_text(cfg, "include " + w.base_cfg + "\ntrain.momentum = 0.9\n");
    CommandResult r = vox("train --config " + cfg);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("train.momentum") != std::string::npos);

    CommandResult r2 = vox("train --config " + w.base_cfg + " --set tran.lr0=1");
    CHECK(r2.exit_code == 1);
    CHECK(r2.output.find("tran.lr0") != std::string::npos);
}

TEST_CASE("cli: tts writes a WAV; same seed gives byte-identical output") {
    auto& w = world();
    const std::string& ckpt = trained_checkpoint();
    std::string ref = w.fx.records[0].audio_path;
    std::string out1 = w.dir + "/tts1.wav", out2 = w.dir + "/tts2.wav", out3 = w.dir + "/tts3.wav";

    CommandResult r1 = vox("tts --checkpoint " + ckpt + " --text 'aa iy uw eh' --ref " + ref +
                           " --out " + out1 + " --seed 9");
    REQUIRE(r1.exit_code == 0);
    WavData wav = read_wav(out1);
    CHECK(wav.sample_rate == 8000);
    CHECK(wav.samples.size() % 64 == 0);  // whole frames only
    CHECK(wav.samples.size() >= 4u * 64u);

    CommandResult r2 = vox("tts --checkpoint " + ckpt + " --text 'aa iy uw eh' --ref " + ref +
                           " --out " + out2 + " --seed 9");
    REQUIRE(r2.exit_code == 0);
    CHECK(read_text(out1) == read_text(out2));

    CommandResult r3 = vox("tts --checkpoint " + ckpt + " --text 'aa iy uw eh' --ref " + ref +
                           " --out " + out3 + " --seed 10");
    REQUIRE(r3.exit_code == 0);
    CHECK(read_text(out1) != read_text(out3));
}

TEST_CASE("cli: tts pace flag stretches the output proportionally") {
    auto& w = world();
    const std::string& ckpt = trained_checkpoint();
    std::string ref = w.fx.records[0].audio_path;
    std::string out1 = w.dir + "/pace1.wav", out2 = w.dir + "/pace2.wav";
    REQUIRE(vox("tts --checkpoint " + ckpt + " --text 'aa iy' --ref " + ref + " --out " + out1 +
                " --seed 1")
                .exit_code == 0);
    REQUIRE(vox("tts --checkpoint " + ckpt + " --text 'aa iy' --ref " + ref + " --out " + out2 +
                " --seed 1 --pace 3")
                .exit_code == 0);
    // With near-uniform toy durations tripling the pace triples every frame count.
    CHECK(read_wav(out2).samples.size() == 3 * read_wav(out1).samples.size());
}

TEST_CASE("cli: tts batch file synthesizes every request") {
    auto& w = world();
    const std::string& ckpt = trained_checkpoint();
    std::string batch = w.dir + "/batch.txt";
    std::string o1 = w.dir + "/b1.wav", o2 = w.dir + "/b2.wav";
    write_text(batch, "# two requests\n" + o1 + "|" + w.fx.records[0].audio_path + "|aa iy\n" + o2 +
                          "|" + w.fx.records[2].audio_path + "|uw eh mm\n");
    CommandResult r = vox("tts --checkpoint " + ckpt + " --batch " + batch + " --seed 4");
    REQUIRE(r.exit_code == 0);
    CHECK(read_wav(o1).samples.size() >= 2u * 64u);
    CHECK(read_wav(o2).samples.size() >= 3u * 64u);

    write_text(batch, "just-one-field\n");
    CHECK(vox("tts --checkpoint " + ckpt + " --batch " + batch).exit_code == 2);
}

TEST_CASE("cli: tts failure modes exit nonzero with a message") {
    auto& w = world();
    const std::string& ckpt = trained_checkpoint();
    std::string ref = w.fx.records[0].audio_path;

    CommandResult miss = vox("tts --checkpoint " + ckpt + " --text 'aa' --ref " + w.dir +
                             "/nope.wav --out " + w.dir + "/x.wav");
    CHECK(miss.exit_code == 2);

    CommandResult unk = vox("tts --checkpoint " + ckpt + " --text 'aa qq' --ref " + ref +
                            " --out " + w.dir + "/x.wav");
    CHECK(unk.exit_code == 2);
    CHECK(unk.output.find("qq") != std::string::npos);

    CHECK(vox("tts --text 'aa' --ref " + ref + " --out x.wav").exit_code == 1);  // no checkpoint
    CHECK(vox("tts --checkpoint " + w.dir + "/no.ckpt --text 'aa' --ref " + ref + " --out " +
              w.dir + "/x.wav")
              .exit_code == 2);
}

TEST_CASE("cli: vc converts and preserves the source frame count") {
    auto& w = world();
    const std::string& ckpt = trained_checkpoint();
    std::string src = w.fx.records[0].audio_path;  // spk_a
    std::string ref = w.fx.records[2].audio_path;  // spk_b
    std::string out = w.dir + "/vc.wav";
    CommandResult r = vox("vc --checkpoint " + ckpt + " --source " + src + " --ref " + ref +
                          " --out " + out + " --seed 2");
    REQUIRE(r.exit_code == 0);
    WavData src_wav = read_wav(src);
    WavData out_wav = read_wav(out);
    size_t frames = 1 + src_wav.samples.size() / 64;
    CHECK(out_wav.samples.size() == frames * 64);
}

TEST_CASE("cli: eval reports one cosine row per pair plus the mean") {
    auto& w = world();
    const std::string& ckpt = trained_checkpoint();
    std::string out = w.dir + "/eval.txt";
    CommandResult r = vox("eval --checkpoint " + ckpt + " --manifest " + w.fx.manifest_path +
                          " --out " + out + " --seed 3 --set run.out_dir=" + w.dir + "/eval_wav");
    REQUIRE(r.exit_code == 0);
    std::string text = read_text(out);
    std::istringstream is(text);
    std::string line;
    int pair_rows = 0;
    bool mean_row = false, ci_row = false;
    while (std::getline(is, line)) {
        if (line.rfind("pair ", 0) == 0) ++pair_rows;
        if (line.rfind("mean_smcs ", 0) == 0) mean_row = true;
        if (line.rfind("ci95 ", 0) == 0) ci_row = true;
    }
    CHECK(pair_rows == 4);
    CHECK(mean_row);
    CHECK(ci_row);
}

TEST_CASE("cli: eval --wer without a recognizer template names the config key") {
    auto& w = world();
    CommandResult r = vox("eval --checkpoint " + trained_checkpoint() + " --manifest " +
                          w.fx.manifest_path + " --wer");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("eval.asr_command") != std::string::npos);
}

TEST_CASE("cli: eval --wer with a fake recognizer emits the rate") {
    auto& w = world();
    std::string out = w.dir + "/eval_wer.txt";
    // The "recognizer" always answers "aa"; every other word counts as an error.
    CommandResult r = vox("eval --checkpoint " + trained_checkpoint() + " --manifest " +
                          w.fx.manifest_path + " --out " + out +
                          " --wer --set 'eval.asr_command=printf aa # {}'" +
                          " --set run.out_dir=" + w.dir + "/eval_wav2");
    REQUIRE(r.exit_code == 0);
    std::string text = read_text(out);
    size_t at = text.find("wer ");
    REQUIRE(at != std::string::npos);
    double wer = std::stod(text.substr(at + 4));
    CHECK(wer > 0.0);
    CHECK(wer <= 1.0);
}

TEST_CASE("cli: eval writes plot data with one labeled point per utterance") {
    auto& w = world();
    std::string plot = w.dir + "/plot.txt";
    CommandResult r = vox("eval --checkpoint " + trained_checkpoint() + " --manifest " +
                          w.fx.manifest_path + " --out " + w.dir + "/eval_p.txt --plot " + plot +
                          " --set run.out_dir=" + w.dir + "/eval_wav3");
    REQUIRE(r.exit_code == 0);
    std::string text = read_text(plot);
    CHECK(line_count(text) == 8);  // 4 synth + 4 reference embeddings
    CHECK(text.find("spk_a_synth_") != std::string::npos);
    CHECK(text.find("spk_b_ref_") != std::string::npos);
}

TEST_CASE("cli: sweep prints one row per configured length") {
    auto& w = world();
    CommandResult r = vox("sweep --checkpoint " + trained_checkpoint() + " --manifest " +
                          w.fx.manifest_path + " --set eval.sweep_lengths=0.6,1.1,50");
    REQUIRE(r.exit_code == 0);
    std::istringstream is(r.output);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(is, line))
        if (line.rfind("length ", 0) == 0) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].find("used 4") != std::string::npos);
    CHECK(rows[2].find("used 0") != std::string::npos);  // nothing is 50 s long
    CHECK(rows[2].find("skipped 4") != std::string::npos);
}

TEST_CASE("cli: inspect prints checkpoint facts and merged configs") {
    auto& w = world();
    CommandResult r = vox("inspect --checkpoint " + trained_checkpoint());
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("step 10") != std::string::npos);
    CHECK(r.output.find("parameters ") != std::string::npos);
    CHECK(r.output.find("8000 Hz") != std::string::npos);

    CommandResult c = vox("inspect --config " + w.base_cfg);
    REQUIRE(c.exit_code == 0);
    CHECK(c.output.find("audio.sample_rate = 8000") != std::string::npos);
    CHECK(c.output.find("train.batch_size = 2") != std::string::npos);

    CHECK(vox("inspect").exit_code == 1);
}

TEST_CASE("cli: help exits 0 and enumerates the config keys") {
    CommandResult r = vox("--help");
    CHECK(r.exit_code == 0);
    for (std::string key : {"train.lr0", "eval.sweep_lengths", "model.dec_factors",
                            "audio.sample_rate", "run.checkpoint_every", "tts.temperature"})
        CHECK(r.output.find(key) != std::string::npos);
    CHECK(vox("frobnicate").exit_code == 1);
    CHECK(vox("").exit_code == 1);  // a subcommand is required
}
