#pragma once

#include <vector>

namespace voxflow {

// Windowed-sinc resampler. Output length = round(n * out_rate / in_rate).
std::vector<float> resample(const std::vector<float>& x, int in_rate, int out_rate);

}  // namespace voxflow
