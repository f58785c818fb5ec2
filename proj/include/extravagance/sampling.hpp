#pragma once

#include <cstdint>

#include "numeric.hpp"
#include "orbit.hpp"

namespace extrav {

/// SplitMix64 (Steele, Lea, Flood 2014): 64-bit state, increment
/// 0x9e3779b97f4a7c15, output mix with the variant-13 constants.
class splitmix64 {
public:
    explicit splitmix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1p-53; }

private:
    std::uint64_t state_;
};

/// A uniformly random P-bit point: ceil(P/64) outputs concatenated
/// big-endian, truncated to the top P bits. Exact, so error_bound = 0.
inline torus_point sample_point(splitmix64& rng, unsigned precision_bits) {
    const unsigned words = (precision_bits + 63) / 64;
    big_int m = 0;
    for (unsigned i = 0; i < words; ++i) m = (m << 64) | big_int(rng.next());
    m >>= words * 64 - precision_bits;
    return {m, precision_bits, 0.0L};
}

/// The i-th sample of a seeded stream of points, independent of how many
/// workers draw samples.
inline torus_point sample_point_at(std::uint64_t seed, std::uint64_t index, unsigned precision_bits) {
    splitmix64 mix(seed);
    for (std::uint64_t i = 0; i < index; ++i) mix.next();
    splitmix64 rng(mix.next());
    return sample_point(rng, precision_bits);
}

} // namespace extrav
