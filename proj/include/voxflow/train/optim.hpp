#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "voxflow/core/tape.hpp"
#include "voxflow/train/train_config.hpp"

namespace voxflow {

// Global L2 norm over every gradient in the partition.
template <class S>
double gradient_norm(const ParamRefs<S>& params) {
    double sq = 0;
    for (const auto& [name, p] : params)
        for (const S& g : p->grad.v) sq += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(sq);
}

// Scale gradients so the partition's global norm is at most max_norm.
template <class S>
void clip_gradients(const ParamRefs<S>& params, double max_norm) {
    double norm = gradient_norm(params);
    if (norm <= max_norm || norm == 0) return;
    S f = static_cast<S>(max_norm / norm);
    for (const auto& [name, p] : params)
        for (S& g : p->grad.v) g *= f;
}

// AdamW over one parameter partition. Moments live on the parameters
// themselves so checkpointing the model captures the optimizer too; this
// object only carries the hyperparameters and the step count.
//
// Weight decay is decoupled: value *= (1 - lr * weight_decay) before the
// moment update, so a step with all-zero gradients shrinks parameters by
// exactly that factor.
template <class S>
class AdamW {
public:
    AdamW() = default;
    AdamW(double beta1, double beta2, double eps, double weight_decay)
        : b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

    int64_t steps_taken() const { return t_; }
    void set_steps_taken(int64_t t) { t_ = t; }

    void step(const ParamRefs<S>& params, double lr, double clip_norm) {
        clip_gradients(params, clip_norm);
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        const S shrink = static_cast<S>(1.0 - lr * wd_);
        for (const auto& [name, p] : params) {
            for (int64_t i = 0; i < p->value.numel(); ++i) {
                double g = static_cast<double>(p->grad.v[i]);
                double m = b1_ * static_cast<double>(p->adam_m.v[i]) + (1.0 - b1_) * g;
                double v = b2_ * static_cast<double>(p->adam_v.v[i]) + (1.0 - b2_) * g * g;
                p->adam_m.v[i] = static_cast<S>(m);
                p->adam_v.v[i] = static_cast<S>(v);
                double update = (m / bc1) / (std::sqrt(v / bc2) + eps_);
                p->value.v[i] = static_cast<S>(p->value.v[i] * shrink - static_cast<S>(lr * update));
            }
        }
    }

private:
    double b1_ = 0.8, b2_ = 0.99, eps_ = 1e-8, wd_ = 0.01;
    int64_t t_ = 0;
};

}  // namespace voxflow
