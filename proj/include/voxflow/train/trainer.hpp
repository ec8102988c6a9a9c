#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "voxflow/audio/spectrogram.hpp"
#include "voxflow/data/dataset.hpp"
#include "voxflow/model/losses.hpp"
#include "voxflow/model/model.hpp"
#include "voxflow/train/optim.hpp"
#include "voxflow/train/train_config.hpp"

namespace voxflow {

// Runs the joint optimization loop: one shared graph per batch, one backward
// pass, then separate AdamW steps for the generator and discriminator
// partitions (gradient routing keeps them isolated: the discriminator loss
// sees detached embeddings, the encoder-side loss a frozen discriminator,
// and the timbre penalty reaches the generator only through gradient
// reversal).
//
// All randomness derives from (seed, step index): batch order from the epoch
// number, reference pairing and per-item noise from the step number. A step
// is therefore a pure function of (parameters, moments, counters), which is
// what makes checkpoint resume bitwise exact without serializing stream
// state.
template <class S>
class Trainer {
public:
    Trainer(TtsModel<S>& model, const Dataset<S>& data, TrainConfig cfg)
        : model_(model),
          data_(data),
          cfg_(cfg),
          audio_(data.spectrogram_config()),
          mel_fb_(mel_filterbank<S>(data.spectrogram_config())),
          gen_params_(model.generator_params()),
          disc_params_(model.discriminator_params()),
          gen_opt_(cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay),
          disc_opt_(cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay) {
        cfg_.validate();
        model_.cfg.validate();
        if (audio_.bins() != model_.cfg.spec_bins)
            throw Error("trainer: spectrogram bins " + std::to_string(audio_.bins()) +
                        " != model spec_bins " + std::to_string(model_.cfg.spec_bins));
        if (model_.cfg.upsample_total() != audio_.hop)
            throw Error("trainer: decoder upsampling " + std::to_string(model_.cfg.upsample_total()) +
                        " != hop " + std::to_string(audio_.hop));
        if (data_.vocab().size() != model_.cfg.vocab_size)
            throw Error("trainer: vocabulary size " + std::to_string(data_.vocab().size()) +
                        " != model vocab_size " + std::to_string(model_.cfg.vocab_size));
        for (int i = 0; i < data_.size(); ++i) {
            const auto& it = data_.item(i);
            if (it.frames < 5)
                throw Error("trainer: utterance too short for span splits (< 5 frames): " +
                            it.rec.audio_path);
            if (it.phoneme_ids.empty())
                throw Error("trainer: utterance without phonemes: " + it.rec.audio_path);
            if (it.frames < static_cast<int>(it.phoneme_ids.size()))
                throw Error("trainer: more phonemes than frames: " + it.rec.audio_path);
        }
    }

    int64_t steps_done() const { return step_; }
    int64_t current_epoch() const { return step_ / steps_per_epoch(); }
    int steps_per_epoch() const { return (data_.size() + cfg_.batch_size - 1) / cfg_.batch_size; }
    double current_lr() const {
        return cfg_.lr0 * std::pow(cfg_.lr_gamma, static_cast<double>(current_epoch()));
    }
    const TrainConfig& config() const { return cfg_; }

    // Checkpoint plumbing: counters in, counters out. Parameter and moment
    // tensors live on the model and travel with it.
    int64_t adam_steps_gen() const { return gen_opt_.steps_taken(); }
    int64_t adam_steps_disc() const { return disc_opt_.steps_taken(); }
    void restore_counters(int64_t step, int64_t adam_gen, int64_t adam_disc) {
        step_ = step;
        gen_opt_.set_steps_taken(adam_gen);
        disc_opt_.set_steps_taken(adam_disc);
        cached_epoch_ = -1;
    }

    // Assemble the next batch in the deterministic schedule and train on it.
    LossReport step() {
        int64_t epoch = current_epoch();
        int cursor = static_cast<int>(step_ % steps_per_epoch());
        if (epoch != cached_epoch_) {
            RandomStream shuffle(mix_seed(mix_seed(cfg_.seed, kTagShuffle), static_cast<uint64_t>(epoch)));
            BatchSampler sampler(data_.size(), cfg_.batch_size);
            epoch_batches_ = sampler.epoch(shuffle);
            cached_epoch_ = epoch;
        }
        const std::vector<int>& indices = epoch_batches_[static_cast<size_t>(cursor)];
        RandomStream pair_rng(mix_seed(mix_seed(cfg_.seed, kTagPair), static_cast<uint64_t>(step_)));
        std::vector<int> refs;
        refs.reserve(indices.size());
        for (int idx : indices) refs.push_back(data_.sample_reference(idx, pair_rng));
        return step_batch(collate(data_, indices, refs));
    }

    // Train on an explicit batch. The noise stream depends only on (seed,
    // step counter), never on padding, so re-padding a batch cannot change
    // any loss value.
    LossReport step_batch(const TrainingBatch<S>& batch) {
        const int B = batch.slots();
        RandomStream rng(mix_seed(mix_seed(cfg_.seed, kTagNoise), static_cast<uint64_t>(step_)));
        Tape<S> tape;

        Var recon{}, kl{}, dur{}, lp{}, lse{}, ld{};
        auto acc = [&](Var& sum, Var v) { sum = sum.valid() ? add(tape, sum, v) : v; };
        for (int b = 0; b < B; ++b) {
            ItemTerms terms = train_item(tape, batch, b, rng);
            acc(recon, terms.recon);
            acc(kl, terms.kl);
            acc(dur, terms.dur);
            acc(lp, terms.lp);
            acc(lse, terms.lse);
            acc(ld, terms.ld);
        }
        const double inv_b = 1.0 / B;
        recon = scale(tape, recon, inv_b);
        kl = scale(tape, kl, inv_b);
        dur = scale(tape, dur, inv_b);
        lp = scale(tape, lp, inv_b);
        lse = scale(tape, lse, inv_b);
        ld = scale(tape, ld, inv_b);

        LossReport r;
        r.step = step_ + 1;
        r.epoch = current_epoch();
        r.lr = current_lr();
        r.recon = value_of(tape, recon, "reconstruction");
        r.kl = value_of(tape, kl, "prior-matching");
        r.duration = value_of(tape, dur, "duration");
        r.leakage = value_of(tape, lp, "leakage-discriminator");
        r.adv_speaker = value_of(tape, lse, "speaker-adversarial");
        r.timbre = value_of(tape, ld, "timbre-residual");
        r.total_generator = cfg_.recon_weight * r.recon + cfg_.kl_weight * r.kl +
                            cfg_.duration_weight * r.duration + r.adv_speaker + r.timbre;
        r.total_discriminator = r.leakage + r.timbre;

        // One backward over the sum of every term: detach/freeze/reversal
        // wiring already routes each gradient to exactly one partition.
        Var total = add(tape, scale(tape, recon, cfg_.recon_weight), scale(tape, kl, cfg_.kl_weight));
        total = add(tape, total, scale(tape, dur, cfg_.duration_weight));
        total = add(tape, total, lse);
        total = add(tape, total, lp);
        total = add(tape, total, ld);

        for (const auto& [name, p] : gen_params_) p->zero_grad();
        for (const auto& [name, p] : disc_params_) p->zero_grad();
        tape.backward(total);

        const double lr = current_lr();
        gen_opt_.step(gen_params_, lr, cfg_.grad_clip);
        disc_opt_.step(disc_params_, lr, cfg_.grad_clip);
        ++step_;
        return r;
    }

private:
    static constexpr uint64_t kTagShuffle = 0x65706f6368ULL;
    static constexpr uint64_t kTagPair = 0x7061697273ULL;
    static constexpr uint64_t kTagNoise = 0x6e6f697365ULL;

    struct ItemTerms {
        Var recon, kl, dur, lp, lse, ld;
    };

    double value_of(Tape<S>& t, Var v, const std::string& term) const {
        double x = static_cast<double>(t.val(v).v[0]);
        if (!std::isfinite(x))
            throw Error("training: non-finite " + term + " loss at step " + std::to_string(step_ + 1));
        return x;
    }

    // The full per-utterance graph. Stream draws happen in a fixed order —
    // GT noise, reference noise, rho, span choice, segment start, prior
    // noise — so the schedule depends only on true lengths.
    ItemTerms train_item(Tape<S>& t, const TrainingBatch<S>& batch, int b, RandomStream& rng) {
        const CachedUtterance<S>& gt = data_.item(batch.indices[static_cast<size_t>(b)]);
        const int T = batch.frames[static_cast<size_t>(b)];
        const int R = batch.ref_frames[static_cast<size_t>(b)];

        // Posterior latents for both utterances, at true length.
        Var spec_gt = t.constant(batch.item_spec(b));
        Var spec_ref = t.constant(batch.item_ref_spec(b));
        GaussianStats<S> post_gt = model_.posterior(t, spec_gt);
        GaussianStats<S> post_ref = model_.posterior(t, spec_ref);
        Var z_gt = sample_gaussian(t, post_gt, rng);
        Var z_ref = sample_gaussian(t, post_ref, rng);

        // Overlapping reference spans -> embedding pairs + downstream choice.
        double rho = rng.uniform(cfg_.rho_min, cfg_.rho_max);
        OverlapSplit sp = split_overlapping(R, rho);
        bool first = choose_first_span(rng);
        Var emb_gt = model_.cfg.speaker_input_spectrogram ? spec_gt : z_gt;
        Var emb_ref = model_.cfg.speaker_input_spectrogram ? spec_ref : z_ref;
        ContrastivePairs<S> pairs =
            make_contrastive_pairs(t, model_.speaker, emb_gt, emb_ref, sp, first);

        // Remove timbre, align against the phoneme prior, expand to frames.
        auto rev = model_.flow.reverse(t, z_gt, pairs.s_downstream);
        auto enc = model_.text(t, batch.phonemes[static_cast<size_t>(b)]);
        Tensor<double> ll =
            alignment_log_likelihood(t.val(rev.value), t.val(enc.stats.mu), t.val(enc.stats.log_sigma));
        std::vector<int> durations = monotonic_align(ll);
        GaussianStats<S> prior = expand_to_frames(t, enc.stats, durations, T);

        ItemTerms o;
        o.kl = prior_matching_loss(t, post_gt, rev.value, prior, rev.log_det);
        o.dur = duration_loss(t, model_.duration.log_durations(t, enc.hidden, pairs.s_downstream),
                              durations);

        // Decode a random latent segment; compare log-mels over the matching
        // waveform slice ((start + seg)·hop never exceeds the audio length).
        const int seg = std::min(cfg_.segment_frames, T - 1);
        const int start = static_cast<int>(rng.uniform_int(T - seg));
        const int hop = audio_.hop;
        Var wav_hat = model_.decoder(t, slice_rows(t, z_gt, start, start + seg));
        Var mel_hat =
            log_mel_from_mag(t, stft_mag(t, wav_hat, audio_), t.constant(mel_fb_), audio_.log_floor);
        std::vector<S> wav_seg(gt.wav.begin() + static_cast<int64_t>(start) * hop,
                               gt.wav.begin() + static_cast<int64_t>(start + seg) * hop);
        o.recon = mel_l1(t, mel_hat, t.constant(log_mel(wav_seg, audio_)));

        // Adversarial pieces: encoder side against the frozen discriminator,
        // discriminator side on detached pairs, timbre side with a detached
        // prior sample and a gradient-reversed flow output.
        o.lse = speaker_encoder_adversarial_loss(
            t, model_.disc_p.run_frozen(t, pairs.pair_overlap), cfg_.lambda_se);
        o.lp = leakage_discriminator_loss(t, model_.disc_p.run(t, detach(t, pairs.pair_contrast)),
                                          model_.disc_p.run(t, detach(t, pairs.pair_overlap)));
        Var m_sample = sample_gaussian(t, prior, rng);
        o.ld = timbre_residual_loss(
            t, model_.disc_t.run(t, detach(t, m_sample)),
            model_.disc_t.run(t, gradient_reversal(t, rev.value, cfg_.lambda_d)));
        return o;
    }

    TtsModel<S>& model_;
    const Dataset<S>& data_;
    TrainConfig cfg_;
    SpectrogramConfig audio_;
    Tensor<S> mel_fb_;
    ParamRefs<S> gen_params_;
    ParamRefs<S> disc_params_;
    AdamW<S> gen_opt_;
    AdamW<S> disc_opt_;
    int64_t step_ = 0;
    int64_t cached_epoch_ = -1;
    std::vector<std::vector<int>> epoch_batches_;
};

}  // namespace voxflow
