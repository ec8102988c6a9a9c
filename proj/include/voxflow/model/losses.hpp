#pragma once

#include <cmath>
#include <vector>

#include "voxflow/core/ops.hpp"
#include "voxflow/model/modules.hpp"

namespace voxflow {

// (d_contrast - 1)^2 + d_overlap^2 on scalar discriminator outputs.
// Callers detach the embedding inputs so only the discriminator learns.
template <class S>
Var leakage_discriminator_loss(Tape<S>& t, Var d_contrast, Var d_overlap) {
    return add(t, square(t, add_const(t, d_contrast, -1.0)), square(t, d_overlap));
}

// lambda_se * (d_overlap - 1)^2, computed against a frozen discriminator.
template <class S>
Var speaker_encoder_adversarial_loss(Tape<S>& t, Var d_overlap, double lambda_se) {
    return scale(t, square(t, add_const(t, d_overlap, -1.0)), lambda_se);
}

// (D_t(m) - 1)^2 + D_t(reverse-flow output)^2; the reverse branch passes
// through gradient reversal before the discriminator, the m branch is
// detached before it.
template <class S>
Var timbre_residual_loss(Tape<S>& t, Var d_m, Var d_rev) {
    return add(t, square(t, add_const(t, d_m, -1.0)), square(t, d_rev));
}

// Masked KL between the posterior and the flow-pulled-back prior, averaged
// per frame and dimension:
//   E_q[log q(z) - log p(u | m) - log|det dT^-1/dz|] / (T*d),  u = T^-1(z, s).
// The entropy part uses its closed form (-log sigma_q - 1/2).
template <class S>
Var prior_matching_loss(Tape<S>& t, GaussianStats<S> posterior, Var u, GaussianStats<S> prior,
                        Var log_det_reverse) {
    const Tensor<S>& mu_p = t.val(prior.mu);
    int T = mu_p.rows(), d = mu_p.cols();
    if (t.val(u).rows() != T || t.val(u).cols() != d)
        throw Error("prior_matching_loss: shape mismatch between prior and transformed latent");
    Var a = add_const(t, sub(t, prior.log_sigma, posterior.log_sigma), -0.5);
    Var diff = sub(t, u, prior.mu);
    Var quad = mul(t, square(t, diff), exp_(t, scale(t, prior.log_sigma, -2.0)));
    Var elem = add(t, a, scale(t, quad, 0.5));
    Var total = sub(t, sum_all(t, elem), log_det_reverse);
    return scale(t, total, 1.0 / (static_cast<double>(T) * d));
}

// Mean squared log-domain duration error; targets are alignment frame counts.
template <class S>
Var duration_loss(Tape<S>& t, Var log_dur_pred, const std::vector<int>& target) {
    const Tensor<S>& p = t.val(log_dur_pred);
    if (p.rows() != static_cast<int>(target.size()) || p.cols() != 1)
        throw Error("duration_loss: prediction/target length mismatch");
    Tensor<S> logt({static_cast<int>(target.size()), 1});
    for (size_t i = 0; i < target.size(); ++i) {
        if (target[i] < 1) throw Error("duration_loss: target duration must be >= 1");
        logt.v[i] = static_cast<S>(std::log(static_cast<double>(target[i])));
    }
    return mean_all(t, square(t, sub(t, log_dur_pred, t.constant(std::move(logt)))));
}

// Mean absolute difference between two log-mel tensors already on the tape.
template <class S>
Var mel_l1(Tape<S>& t, Var log_mel_hat, Var log_mel_gt) {
    if (!t.val(log_mel_hat).same_shape(t.val(log_mel_gt))) throw Error("mel_l1: shape mismatch");
    return mean_all(t, abs_(t, sub(t, log_mel_hat, log_mel_gt)));
}

}  // namespace voxflow
