#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "voxflow/core/tensor.hpp"
#include "voxflow/pipeline/synthesizer.hpp"

namespace voxflow {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct EvalUtterance {
    std::string id;
    std::vector<float> samples;
    int sample_rate = 0;
};

using Embedder = std::function<std::vector<double>(const EvalUtterance&)>;

// Speaker-similarity summary over paired utterances: per-pair cosine, mean,
// and a normal-approximation 95% interval half-width (0 and flagged for a
// single pair, where no spread is estimable).
struct SimilarityResult {
    std::vector<std::pair<std::string, double>> pairs;
    double mean = 0;
    double ci95 = 0;
    bool degenerate_ci = false;
};

inline SimilarityResult smcs(const std::vector<EvalUtterance>& synth,
                             const std::vector<EvalUtterance>& refs, const Embedder& embed) {
    if (synth.empty() || synth.size() != refs.size())
        throw Error("smcs: need matching non-empty utterance lists");
    SimilarityResult r;
    for (size_t i = 0; i < synth.size(); ++i) {
        double c = cosine_similarity(embed(synth[i]), embed(refs[i]));
        std::string id = synth[i].id.empty() ? std::to_string(i) : synth[i].id;
        r.pairs.emplace_back(id, c);
        r.mean += c;
    }
    const int n = static_cast<int>(r.pairs.size());
    r.mean /= n;
    if (n == 1) {
        r.degenerate_ci = true;
        return r;
    }
    double sq = 0;
    for (const auto& [id, c] : r.pairs) sq += (c - r.mean) * (c - r.mean);
    r.ci95 = 1.96 * std::sqrt(sq / (n - 1)) / std::sqrt(static_cast<double>(n));
    return r;
}

struct SweepItem {
    std::vector<std::string> phonemes;
    EvalUtterance reference;
};

struct SweepRow {
    double length_s = 0;
    double mean_smcs = 0;
    int used = 0;
    int skipped = 0;
};

// Fig.-2-style study: synthesize each item with its reference trimmed to L
// seconds and compare against the FULL reference embedding. Per-item seeds
// are mix_seed(seed, item_index), independent of L, so trimming to the full
// length reproduces a plain run exactly. Too-short references are skipped
// with a warning on `warn`.
template <class S>
std::vector<SweepRow> reference_length_sweep(const Synthesizer<S>& synth,
                                             const std::vector<SweepItem>& items,
                                             const std::vector<double>& lengths_s,
                                             const Embedder& embed, uint64_t seed,
                                             std::ostream* warn = nullptr) {
    if (items.empty()) throw Error("sweep: no evaluation items");
    for (double L : lengths_s)
        if (!(L > 0)) throw Error("sweep: lengths must be positive");

    std::vector<std::vector<double>> full_ref_emb;
    full_ref_emb.reserve(items.size());
    for (const auto& it : items) full_ref_emb.push_back(embed(it.reference));

    std::vector<SweepRow> rows;
    for (double L : lengths_s) {
        SweepRow row;
        row.length_s = L;
        for (size_t i = 0; i < items.size(); ++i) {
            const EvalUtterance& ref = items[i].reference;
            auto need = static_cast<size_t>(std::llround(L * ref.sample_rate));
            if (need > ref.samples.size()) {
                ++row.skipped;
                if (warn)
                    *warn << "sweep: skipping " << (ref.id.empty() ? std::to_string(i) : ref.id)
                          << " at " << L << " s (reference is only "
                          << static_cast<double>(ref.samples.size()) / ref.sample_rate << " s)\n";
                continue;
            }
            std::vector<float> trimmed(ref.samples.begin(),
                                       ref.samples.begin() + static_cast<int64_t>(need));
            std::vector<float> out = synth.tts(items[i].phonemes, trimmed, ref.sample_rate,
                                               mix_seed(seed, static_cast<uint64_t>(i)));
            EvalUtterance synth_utt{ref.id, std::move(out), synth.audio().sample_rate};
            row.mean_smcs += cosine_similarity(embed(synth_utt), full_ref_emb[i]);
            ++row.used;
        }
        if (row.used > 0) row.mean_smcs /= row.used;
        rows.push_back(row);
    }
    return rows;
}

// --- intelligibility hook (external recognizer) ---

std::vector<std::string> tokenize_words(const std::string& text);
int word_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr, interleaved
};
CommandResult run_command_capture(const std::string& command);

// Runs `asr_command_template` per audio file ({} replaced by the path), reads
// the transcript from stdout, and returns total word edit distance divided by
// total expected words.
double wer_hook(const std::vector<std::string>& expected,
                const std::vector<std::string>& audio_paths,
                const std::string& asr_command_template);

}  // namespace voxflow
