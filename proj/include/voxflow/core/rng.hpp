#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace voxflow {

// PCG32 with an explicit, serializable state. All randomness in the toolkit
// flows through this so that runs are reproducible across platforms and a
// checkpoint can restore the exact stream position.
class RandomStream {
public:
    RandomStream() : RandomStream(0x853c49e6748fea9bULL) {}

    explicit RandomStream(uint64_t seed, uint64_t stream = 0) { reseed(seed, stream); }

    void reseed(uint64_t seed, uint64_t stream = 0) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0, 1).
    double uniform() { return next_u32() * (1.0 / 4294967296.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int64_t uniform_int(int64_t n) {
        // Rejection sampling to avoid modulo bias.
        uint64_t bound = static_cast<uint64_t>(n);
        uint64_t threshold = (0x100000000ULL / bound) * bound;
        for (;;) {
            uint64_t x = next_u32();
            if (x < threshold) return static_cast<int64_t>(x % bound);
        }
    }

    // Box-Muller, no cached spare: keeps the stream state a pure function of
    // the draw count, which keeps checkpoint resume exact.
    double normal() {
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    uint64_t state() const { return state_; }
    uint64_t inc() const { return inc_; }
    void restore(uint64_t state, uint64_t inc) { state_ = state; inc_ = inc; }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 0;
};

// Stable 64-bit mix for deriving per-worker / per-item streams from a run seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27; x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace voxflow
