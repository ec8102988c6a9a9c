#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

// Optimization schedule and loss weights. Defaults are the published recipe;
// presets override batch size and step count for desk-scale runs.
struct TrainConfig {
    double lr0 = 2e-4;
    double lr_gamma = 0.999875;  // multiplicative decay applied once per epoch
    double beta1 = 0.8;
    double beta2 = 0.99;
    double weight_decay = 0.01;
    double adam_eps = 1e-8;
    double grad_clip = 5.0;  // global-norm clip, applied per optimizer partition

    double lambda_se = 8.0;  // speaker-encoder adversarial weight
    double lambda_d = 8.0;   // gradient-reversal scale for the timbre penalty
    double rho_min = 0.2;    // overlap ratio range for reference splits
    double rho_max = 0.4;

    double recon_weight = 45.0;
    double kl_weight = 1.0;
    double duration_weight = 1.0;

    int batch_size = 64;
    int segment_frames = 32;  // decoded waveform segment length (latent frames)
    uint64_t seed = 1234;

    void validate() const {
        if (!(lr0 > 0) || !(lr_gamma > 0) || lr_gamma > 1)
            throw Error("train: learning rate schedule out of range");
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
            throw Error("train: Adam betas must lie in [0, 1)");
        if (!(weight_decay >= 0) || !(adam_eps > 0)) throw Error("train: bad optimizer constants");
        if (!(grad_clip > 0)) throw Error("train: grad_clip must be positive");
        if (lambda_se < 0 || lambda_d < 0) throw Error("train: adversarial weights must be >= 0");
        if (!(rho_min > 0
              && rho_min <= rho_max && rho_max < 1))
            throw Error("train: rho range must satisfy 0 < rho_min <= rho_max < 1");
        if (recon_weight < 0 || kl_weight < 0 || duration_weight < 0)
            throw Error("train: loss weights must be >= 0");
        if (batch_size < 1) throw Error("train: batch_size must be >= 1");
        if (segment_frames < 1) throw Error("train: segment_frames must be >= 1");
    }
};

// Per-step loss summary. Term fields hold raw batch means; the totals are the
// scalars whose gradients drive each optimizer (generator total applies the
// recon/kl/duration weights; both totals include the timbre term's value since
// its gradient reaches both partitions).
struct LossReport {
    int64_t step = 0;
    int64_t epoch = 0;
    double lr = 0;
    double recon = 0;        // mel L1, unweighted
    double kl = 0;           // prior matching, per frame and dimension
    double duration = 0;     // log-domain duration MSE
    double leakage = 0;      // discriminator loss on embedding pairs
    double adv_speaker = 0;  // encoder-side adversarial term (lambda included)
    double timbre = 0;       // timbre-residual discriminator loss
    double total_generator = 0;
    double total_discriminator = 0;
};

// One JSONL record per step. Shortest round-trip formatting keeps logs of
// bitwise-identical runs bitwise identical.
inline std::string metrics_json_line(const LossReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"step\":" << r.step << ",\"epoch\":" << r.epoch << ",\"lr\":" << r.lr
       << ",\"recon\":" << r.recon << ",\"kl\":" << r.kl << ",\"duration\":" << r.duration
       << ",\"leakage\":" << r.leakage << ",\"adv_speaker\":" << r.adv_speaker
       << ",\"timbre\":" << r.timbre << ",\"total_generator\":" << r.total_generator
       << ",\"total_discriminator\":" << r.total_discriminator << "}";
    return os.str();
}

}  // namespace voxflow
