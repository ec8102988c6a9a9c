#include "voxflow/audio/resample.hpp"

#include <cmath>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

namespace {

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    double px = M_PI * x;
    return std::sin(px) / px;
}

}  // namespace

std::vector<float> resample(const std::vector<float>& x, int in_rate, int out_rate) {
    if (in_rate <= 0 || out_rate <= 0) throw Error("resample: rates must be positive");
    if (x.empty()) throw Error("resample: empty input");
    if (in_rate == out_rate) return x;
    double r = static_cast<double>(out_rate) / in_rate;
    int64_t n_out = std::llround(static_cast<double>(x.size()) * r);
    if (n_out < 1) n_out = 1;
    // Anti-alias at 90% of the narrower Nyquist; kernel widened when decimating.
    double scale = std::min(1.0, r);
    double fc = 0.45 * scale;
    int K = static_cast<int>(std::ceil(16.0 / scale));
    std::vector<float> out(static_cast<size_t>(n_out));
    int64_t n = static_cast<int64_t>(x.size());
    for (int64_t j = 0; j < n_out; ++j) {
        double t = j / r;
        int64_t k0 = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(t - K)));
        int64_t k1 = std::min<int64_t>(n - 1, static_cast<int64_t>(std::floor(t + K)));
        double acc = 0, wsum = 0;
        for (int64_t k = k0; k <= k1; ++k) {
            double d = k - t;
            double w = sinc(2.0 * fc * d) * (0.5 + 0.5 * std::cos(M_PI * d / K));
            acc += w * x[k];
            wsum += w;
        }
        out[j] = wsum != 0.0 ? static_cast<float>(acc / wsum) : 0.0f;
    }
    return out;
}

}  // namespace voxflow
