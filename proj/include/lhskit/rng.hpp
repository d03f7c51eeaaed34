#pragma once

#include <cstdint>

namespace lhskit {

// splitmix64: tiny splittable generator used for all randomized sampling.
// Chosen over <random> engines so that streams are bit-stable across
// platforms and standard library versions (reports must be byte-identical
// for a fixed seed).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1): top 53 bits, exact dyadic rational
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double next_in(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // derive an independent stream (split)
    SplitMix64 split() { return SplitMix64(next_u64() ^ 0x8e9a5c4b3d2f1e0dULL); }

private:
    std::uint64_t state_;
};

}  // namespace lhskit
