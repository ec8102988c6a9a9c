#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "voxflow/audio/resample.hpp"
#include "voxflow/audio/spectrogram.hpp"
#include "voxflow/audio/wav.hpp"
#include "voxflow/core/rng.hpp"
#include "voxflow/core/tensor.hpp"
#include "voxflow/data/manifest.hpp"
#include "voxflow/data/vocab.hpp"

namespace voxflow {

template <typename S>
struct CachedUtterance {
    UtteranceRecord rec;
    std::vector<int> phoneme_ids;
    std::vector<S> wav;  // mono, at the spectrogram sample rate
    Tensor<S> spec;      // [frames x bins], linear magnitude
    int frames = 0;
};

// Loads every manifest entry up front: wav -> resample -> magnitude spectrogram.
template <typename S>
class Dataset {
public:
    Dataset(std::vector<UtteranceRecord> records, Vocabulary vocab, SpectrogramConfig cfg)
        : vocab_(std::move(vocab)), cfg_(cfg) {
        cfg_.validate();
        items_.reserve(records.size());
        for (auto& rec : records) {
            CachedUtterance<S> item;
            item.phoneme_ids = vocab_.encode(rec.phonemes);
            WavData raw = read_wav(rec.audio_path);
            std::vector<float> mono = resample(raw.samples, raw.sample_rate, cfg_.sample_rate);
            if (static_cast<int>(mono.size()) <= cfg_.n_fft / 2)
                throw Error("dataset: audio too short for analysis: " + rec.audio_path);
            item.wav.assign(mono.begin(), mono.end());
            item.spec = stft_magnitude(item.wav, cfg_);
            item.frames = item.spec.rows();
            rec.duration_s = static_cast<double>(mono.size()) / cfg_.sample_rate;
            item.rec = std::move(rec);
            items_.push_back(std::move(item));
        }
        if (items_.empty()) throw Error("dataset: no utterances");
        for (int i = 0; i < size(); ++i) speakers_[items_[i].rec.speaker_id].push_back(i);
    }

    int size() const { return static_cast<int>(items_.size()); }
    const CachedUtterance<S>& item(int i) const {
        if (i < 0 || i >= size()) throw Error("dataset: index out of range: " + std::to_string(i));
        return items_[static_cast<size_t>(i)];
    }
    const Vocabulary& vocab() const { return vocab_; }
    const SpectrogramConfig& spectrogram_config() const { return cfg_; }
    const std::map<std::string, std::vector<int>>& speakers() const { return speakers_; }

    // A reference utterance from the same speaker, excluding item i when the
    // speaker has more than one utterance.
    int sample_reference(int i, RandomStream& rng) const {
        const auto& pool = speakers_.at(item(i).rec.speaker_id);
        if (pool.size() < 2) return i;
        // Draw an index into pool \ {i}.
        int my_pos = 0;
        for (int p = 0; p < static_cast<int>(pool.size()); ++p)
            if (pool[static_cast<size_t>(p)] == i) my_pos = p;
        int k = rng.uniform_int(static_cast<int>(pool.size()) - 1);  // [0, n-2]
        if (k >= my_pos) ++k;
        return pool[static_cast<size_t>(k)];
    }

private:
    std::vector<CachedUtterance<S>> items_;
    Vocabulary vocab_;
    SpectrogramConfig cfg_;
    std::map<std::string, std::vector<int>> speakers_;
};

// Padded batch: tensors are zero-padded to the longest item, with 0/1 masks.
// True lengths travel alongside so consumers can ignore the padding entirely.
template <typename S>
struct TrainingBatch {
    std::vector<int> indices;      // dataset item per slot
    std::vector<int> ref_indices;  // reference item per slot
    std::vector<int> frames;
    std::vector<int> ref_frames;
    std::vector<std::vector<int>> phonemes;
    int t_max = 0;
    int r_max = 0;
    Tensor<S> spec;        // [B*t_max x bins]
    Tensor<S> ref_spec;    // [B*r_max x bins]
    Tensor<S> frame_mask;  // [B x t_max]
    Tensor<S> ref_mask;    // [B x r_max]

    int slots() const { return static_cast<int>(indices.size()); }

    Tensor<S> item_spec(int b) const { return rows_of(spec, b, t_max, frames[static_cast<size_t>(b)]); }
    Tensor<S> item_ref_spec(int b) const { return rows_of(ref_spec, b, r_max, ref_frames[static_cast<size_t>(b)]); }

private:
    static Tensor<S> rows_of(const Tensor<S>& padded, int b, int stride, int count) {
        Tensor<S> out({count, padded.cols()});
        for (int t = 0; t < count; ++t)
            for (int c = 0; c < padded.cols(); ++c) out.at(t, c) = padded.at(b * stride + t, c);
        return out;
    }
};

template <typename S>
TrainingBatch<S> collate(const Dataset<S>& ds, const std::vector<int>& indices, const std::vector<int>& ref_indices) {
    if (indices.empty() || indices.size() != ref_indices.size())
        throw Error("collate: need matching non-empty index lists");
    TrainingBatch<S> batch;
    batch.indices = indices;
    batch.ref_indices = ref_indices;
    int bins = ds.spectrogram_config().bins();
    for (size_t b = 0; b < indices.size(); ++b) {
        const auto& it = ds.item(indices[b]);
        const auto& rf = ds.item(ref_indices[b]);
        batch.frames.push_back(it.frames);
        batch.ref_frames.push_back(rf.frames);
        batch.phonemes.push_back(it.phoneme_ids);
        batch.t_max = std::max(batch.t_max, it.frames);
        batch.r_max = std::max(batch.r_max, rf.frames);
    }
    int B = batch.slots();
    batch.spec = Tensor<S>({B * batch.t_max, bins});
    batch.ref_spec = Tensor<S>({B * batch.r_max, bins});
    batch.frame_mask = Tensor<S>({B, batch.t_max});
    batch.ref_mask = Tensor<S>({B, batch.r_max});
    for (int b = 0; b < B; ++b) {
        const auto& it = ds.item(indices[static_cast<size_t>(b)]);
        const auto& rf = ds.item(ref_indices[static_cast<size_t>(b)]);
        for (int t = 0; t < it.frames; ++t) {
            batch.frame_mask.at(b, t) = S(1);
            for (int c = 0; c < bins; ++c) batch.spec.at(b * batch.t_max + t, c) = it.spec.at(t, c);
        }
        for (int t = 0; t < rf.frames; ++t) {
            batch.ref_mask.at(b, t) = S(1);
            for (int c = 0; c < bins; ++c) batch.ref_spec.at(b * batch.r_max + t, c) = rf.spec.at(t, c);
        }
    }
    return batch;
}

// Shuffled fixed-size batches, one epoch at a time. The trailing remainder
// (fewer than batch_size items) is kept as a short batch.
class BatchSampler {
public:
    BatchSampler(int n_items, int batch_size) : n_(n_items), bs_(batch_size) {
        if (n_items < 1) throw Error("sampler: empty dataset");
        if (batch_size < 1) throw Error("sampler: batch_size must be >= 1");
    }

    std::vector<std::vector<int>> epoch(RandomStream& rng) const {
        std::vector<int> order(static_cast<size_t>(n_));
        for (int i = 0; i < n_; ++i) order[static_cast<size_t>(i)] = i;
        for (int i = n_ - 1; i > 0; --i) {
            int j = rng.uniform_int(i + 1);
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }
        std::vector<std::vector<int>> batches;
        for (int start = 0; start < n_; start += bs_) {
            int end = std::min(n_, start + bs_);
            batches.emplace_back(order.begin() + start, order.begin() + end);
        }
        return batches;
    }

private:
    int n_;
    int bs_;
};

}  // namespace voxflow
