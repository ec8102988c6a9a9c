#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "support/fixture.hpp"
#include "voxflow/data/dataset.hpp"
#include "voxflow/data/manifest.hpp"
#include "voxflow/data/vocab.hpp"

using namespace voxflow;

namespace {

std::string temp_dir(const std::string& leaf) {
    std::string d = (std::filesystem::temp_directory_path() / leaf).string();
    std::filesystem::create_directories(d);
    return d;
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path);
    f << body;
}

bool throws_containing(const std::function<void()>& fn, const std::string& needle) {
    try {
        fn();
    } catch (const Error& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

}  // namespace

TEST_CASE("manifest: parses pipe-separated records, skipping comments and blanks") {
    std::string dir = temp_dir("vox_manifest");
    std::string path = dir + "/m.txt";
    write_text(path,
               "# corpus header\n"
               "\n"
               "a.wav | spk1 | sil aa iy\n"
               "b.wav|spk2|uw\n");
    auto recs = load_manifest(path);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].audio_path == "a.wav");
    CHECK(recs[0].speaker_id == "spk1");
    CHECK(recs[0].phonemes == std::vector<std::string>{"sil", "aa", "iy"});
    CHECK(recs[1].audio_path == "b.wav");
    CHECK(recs[1].phonemes == std::vector<std::string>{"uw"});

    auto idx = speaker_index(recs);
    REQUIRE(idx.size() == 2);
    CHECK(idx.at("spk1") == std::vector<int>{0});
    CHECK(idx.at("spk2") == std::vector<int>{1});
}

TEST_CASE("manifest: malformed lines are reported with their line number") {
    std::string dir = temp_dir("vox_manifest");
    std::string two = dir + "/two_fields.txt";
    write_text(two, "a.wav|spk1|sil\nb.wav|spk2\n");
    CHECK(throws_containing([&] { load_manifest(two); }, "line 2"));

    std::string blank_speaker = dir + "/blank_spk.txt";
    write_text(blank_speaker, "a.wav| |sil\n");
    CHECK(throws_containing([&] { load_manifest(blank_speaker); }, "speaker"));

    std::string empty = dir + "/empty.txt";
    write_text(empty, "# only a comment\n");
    CHECK(throws_containing([&] { load_manifest(empty); }, "no records"));

    CHECK_THROWS_AS(load_manifest(dir + "/does_not_exist.txt"), Error);
}

TEST_CASE("vocabulary: line order gives ids; duplicates and unknowns are named") {
    std::string dir = temp_dir("vox_vocab");
    std::string path = dir + "/v.txt";
    write_text(path, "sil\naa\niy\n");
    Vocabulary v = Vocabulary::load(path);
    REQUIRE(v.size() == 3);
    CHECK(v.id("sil") == 0);
    CHECK(v.id("iy") == 2);
    CHECK(v.symbol(1) == "aa");
    CHECK(v.contains("aa"));
    CHECK(!v.contains("zz"));
    CHECK(v.encode({"iy", "sil"}) == std::vector<int>{2, 0});
    CHECK(throws_containing([&] { v.id("zz"); }, "zz"));

    std::string dup = dir + "/dup.txt";
    write_text(dup, "aa\naa\n");
    CHECK_THROWS_AS(Vocabulary::load(dup), Error);
}

TEST_CASE("dataset: loads fixture audio and computes frame counts from hop") {
    SpectrogramConfig audio = voxfix::mini_audio();
    voxfix::FixtureSpec fs;
    fs.utts_per_speaker = 2;
    auto fx = voxfix::build_fixture(temp_dir("vox_data_fixture"), audio, fs);
    Vocabulary vocab = Vocabulary::load(fx.vocab_path);
    Dataset<float> ds(load_manifest(fx.manifest_path), vocab, audio);

    REQUIRE(ds.size() == 4);
    for (int i = 0; i < ds.size(); ++i) {
        const auto& it = ds.item(i);
        CHECK(it.frames == it.spec.rows());
        CHECK(it.frames == audio.frames_for(static_cast<int64_t>(it.wav.size())));
        CHECK(it.spec.cols() == audio.bins());
        CHECK(it.phoneme_ids.size() == it.rec.phonemes.size());
        CHECK(it.rec.duration_s > 1.0);
        CHECK(it.rec.duration_s < 2.0);
    }
    REQUIRE(ds.speakers().size() == 2);
    CHECK(ds.speakers().at("spk_a").size() == 2);
    CHECK(ds.speakers().at("spk_b").size() == 2);
    CHECK_THROWS_AS(ds.item(-1), Error);
    CHECK_THROWS_AS(ds.item(4), Error);
}

TEST_CASE("dataset: audio shorter than half a window is rejected by name") {
    SpectrogramConfig audio = voxfix::mini_audio();
    std::string dir = temp_dir("vox_short_audio");
    std::vector<float> blip(100, 0.1f);
    write_wav(dir + "/blip.wav", blip, audio.sample_rate);
    UtteranceRecord rec;
    rec.audio_path = dir + "/blip.wav";
    rec.speaker_id = "s";
    rec.phonemes = {"sil"};
    Vocabulary vocab(std::vector<std::string>{"sil"});
    CHECK(throws_containing([&] { Dataset<float>({rec}, vocab, audio); }, "blip.wav"));
}

TEST_CASE("dataset: reference sampling stays within speaker and avoids self") {
    SpectrogramConfig audio = voxfix::mini_audio();
    voxfix::FixtureSpec fs;
    fs.utts_per_speaker = 3;
    auto fx = voxfix::build_fixture(temp_dir("vox_ref_fixture"), audio, fs);
    Dataset<float> ds(load_manifest(fx.manifest_path), Vocabulary::load(fx.vocab_path), audio);
    REQUIRE(ds.size() == 6);

    RandomStream rng(5);
    std::set<int> seen;
    for (int trial = 0; trial < 200; ++trial) {
        int r = ds.sample_reference(1, rng);
        CHECK(r != 1);
        CHECK(ds.item(r).rec.speaker_id == ds.item(1).rec.speaker_id);
        seen.insert(r);
    }
    CHECK(seen.size() == 2);  // both other utterances of the speaker appear

    // Singleton speaker pool: the reference must fall back to the item itself.
    UtteranceRecord solo = ds.item(0).rec;
    Dataset<float> ds1({solo}, Vocabulary::load(fx.vocab_path), audio);
    CHECK(ds1.sample_reference(0, rng) == 0);
}

TEST_CASE("collate: padding is zero-filled, masks mark true lengths, slices round-trip") {
    SpectrogramConfig audio = voxfix::mini_audio();
    voxfix::FixtureSpec fs;
    fs.utts_per_speaker = 2;
    auto fx = voxfix::build_fixture(temp_dir("vox_collate_fixture"), audio, fs);
    Dataset<float> ds(load_manifest(fx.manifest_path), Vocabulary::load(fx.vocab_path), audio);

    std::vector<int> idx = {0, 2, 3};
    std::vector<int> refs = {1, 3, 2};
    TrainingBatch<float> b = collate(ds, idx, refs);
    REQUIRE(b.slots() == 3);
    int t_max = 0, r_max = 0;
    for (int i = 0; i < 3; ++i) {
        t_max = std::max(t_max, ds.item(idx[i]).frames);
        r_max = std::max(r_max, ds.item(refs[i]).frames);
    }
    CHECK(b.t_max == t_max);
    CHECK(b.r_max == r_max);
    CHECK(b.spec.rows() == 3 * t_max);

    for (int s = 0; s < 3; ++s) {
        const auto& it = ds.item(idx[s]);
        for (int t = 0; t < b.t_max; ++t) {
            CHECK(b.frame_mask.at(s, t) == (t < it.frames ? 1.0f : 0.0f));
            if (t >= it.frames)
                for (int c = 0; c < b.spec.cols(); ++c) CHECK(b.spec.at(s * b.t_max + t, c) == 0.0f);
        }
        Tensor<float> sl = b.item_spec(s);
        REQUIRE(sl.rows() == it.frames);
        CHECK(sl.max_abs() > 0.0f);
        for (int t = 0; t < it.frames; ++t)
            for (int c = 0; c < sl.cols(); ++c) CHECK(sl.at(t, c) == it.spec.at(t, c));
        Tensor<float> rl = b.item_ref_spec(s);
        CHECK(rl.rows() == ds.item(refs[s]).frames);
    }

    CHECK_THROWS_AS(collate(ds, {}, {}), Error);
    CHECK_THROWS_AS(collate(ds, {0}, {0, 1}), Error);
}

TEST_CASE("batch sampler: every epoch is a permutation split into batches") {
    BatchSampler sampler(10, 4);
    RandomStream rng(9);
    auto batches = sampler.epoch(rng);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 4);
    CHECK(batches[2].size() == 2);  // short tail kept
    std::vector<int> all;
    for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    std::vector<int> iota(10);
    for (int i = 0; i < 10; ++i) iota[static_cast<size_t>(i)] = i;
    CHECK(all == iota);

    // Same stream position -> same order; advanced stream -> (almost surely) different.
    RandomStream r1(42), r2(42);
    CHECK(sampler.epoch(r1) == sampler.epoch(r2));
    auto e1 = sampler.epoch(r1);
    auto e2 = sampler.epoch(r1);
    CHECK(e1 != e2);

    CHECK_THROWS_AS(BatchSampler(0, 4), Error);
    CHECK_THROWS_AS(BatchSampler(4, 0), Error);
}

TEST_CASE("fixture: the two voices have distinct pitch and the files round-trip") {
    SpectrogramConfig audio = voxfix::mini_audio();
    voxfix::FixtureSpec fs;
    fs.utts_per_speaker = 1;
    fs.eval_per_speaker = 1;
    auto fx = voxfix::build_fixture(temp_dir("vox_fixture_sanity"), audio, fs);
    REQUIRE(fx.records.size() == 2);
    REQUIRE(fx.eval_records.size() == 2);
    for (const auto& r : fx.eval_records) {
        WavData w = read_wav(r.audio_path);
        CHECK(static_cast<double>(w.samples.size()) / w.sample_rate >= 6.0);
    }

    // Crude pitch check: autocorrelation peak of a voiced stretch.
    auto pitch_of = [&](const std::string& path) {
        WavData w = read_wav(path);
        int sr = w.sample_rate;
        int start = sr / 2, n = sr / 2;
        double best = 0;
        int best_lag = 1;
        for (int lag = sr / 400; lag <= sr / 80; ++lag) {
            double acc = 0;
            for (int i = 0; i < n; ++i) acc += w.samples[start + i] * w.samples[start + i + lag];
            if (acc > best) {
                best = acc;
                best_lag = lag;
            }
        }
        return static_cast<double>(sr) / best_lag;
    };
    double fa = pitch_of(fx.records[0].audio_path);
    double fb = pitch_of(fx.records[1].audio_path);
    CHECK(fa == doctest::Approx(115.0).epsilon(0.12));
    CHECK(fb == doctest::Approx(252.0).epsilon(0.12));
}
