#include "voxflow/audio/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "voxflow/core/tensor.hpp"

namespace voxflow {

namespace {

uint32_t rd_u32(const uint8_t* p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (uint32_t(p[3]) << 24);
}
uint16_t rd_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

}  // namespace

WavData read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open WAV file: " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (raw.size() < 44 || std::memcmp(raw.data(), "RIFF", 4) != 0 || std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
        throw Error("not a RIFF/WAVE file: " + path);

    int channels = 0, bits = 0, fmt_tag = 0;
    WavData out;
    size_t pos = 12;
    const uint8_t* data = nullptr;
    size_t data_len = 0;
    while (pos + 8 <= raw.size()) {
        uint32_t sz = rd_u32(raw.data() + pos + 4);
        const uint8_t* body = raw.data() + pos + 8;
        if (pos + 8 + sz > raw.size()) throw Error("truncated WAV chunk in " + path);
        if (std::memcmp(raw.data() + pos, "fmt ", 4) == 0) {
            if (sz < 16) throw Error("short fmt chunk in " + path);
            fmt_tag = rd_u16(body);
            channels = rd_u16(body + 2);
            out.sample_rate = static_cast<int>(rd_u32(body + 4));
            bits = rd_u16(body + 14);
        } else if (std::memcmp(raw.data() + pos, "data", 4) == 0) {
            data = body;
            data_len = sz;
        }
        pos += 8 + sz + (sz & 1);
    }
    if (!data) throw Error("WAV file has no data chunk: " + path);
    if (channels < 1) throw Error("WAV file has no fmt chunk: " + path);

    size_t frame_bytes = static_cast<size_t>(channels) * (bits / 8);
    if (frame_bytes == 0) throw Error("bad WAV sample format in " + path);
    size_t n = data_len / frame_bytes;
    out.samples.resize(n);
    if (fmt_tag == 1 && bits == 16) {
        for (size_t i = 0; i < n; ++i) {
            double acc = 0;
            for (int c = 0; c < channels; ++c) {
                int16_t s;
                std::memcpy(&s, data + i * frame_bytes + c * 2, 2);
                acc += s / 32768.0;
            }
            out.samples[i] = static_cast<float>(acc / channels);
        }
    } else if (fmt_tag == 3 && bits == 32) {
        for (size_t i = 0; i < n; ++i) {
            double acc = 0;
            for (int c = 0; c < channels; ++c) {
                float s;
                std::memcpy(&s, data + i * frame_bytes + c * 4, 4);
                acc += s;
            }
            out.samples[i] = static_cast<float>(acc / channels);
        }
    } else {
        throw Error("unsupported WAV format (want 16-bit PCM or 32-bit float): " + path);
    }
    if (out.samples.empty()) throw Error("WAV file has no samples: " + path);
    return out;
}

void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write WAV file: " + path);
    uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
    auto wr_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto wr_u16 = [&](uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
    f.write("RIFF", 4);
    wr_u32(36 + data_len);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    wr_u32(16);
    wr_u16(1);  // PCM
    wr_u16(1);  // mono
    wr_u32(static_cast<uint32_t>(sample_rate));
    wr_u32(static_cast<uint32_t>(sample_rate) * 2);
    wr_u16(2);
    wr_u16(16);
    f.write("data", 4);
    wr_u32(data_len);
    for (float s : samples) {
        long q = std::lround(std::min(1.0f, std::max(-1.0f, s)) * 32768.0f);
        int16_t q16 = static_cast<int16_t>(std::min(32767L, std::max(-32768L, q)));
        f.write(reinterpret_cast<const char*>(&q16), 2);
    }
    if (!f) throw Error("short write to WAV file: " + path);
}

}  // namespace voxflow
