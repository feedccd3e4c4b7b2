#pragma once

// Reproducible random streams. Stream i of master seed s is an mt19937_64
// seeded through std::seed_seq from (s, i), so streams are independent of how
// many workers exist and of the order in which they are created.

#include <cstdint>
#include <random>

namespace timebin {

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_index), static_cast<std::uint32_t>(stream_index >> 32),
                      0x7469u};
    return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

inline double exponential(Rng& rng, double mean) {
    return std::exponential_distribution<double>(1.0 / mean)(rng);
}

} // namespace timebin
