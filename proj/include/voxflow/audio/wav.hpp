#pragma once

#include <string>
#include <vector>

namespace voxflow {

struct WavData {
    std::vector<float> samples;  // mono, [-1, 1]
    int sample_rate = 0;
};

// Reads 16-bit PCM or 32-bit float WAV; multi-channel input is averaged to mono.
WavData read_wav(const std::string& path);

// Writes mono 16-bit PCM; samples are clipped to [-1, 1].
void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate);

}  // namespace voxflow
