#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>

namespace svdclass {

// Standard distributions are implementation-defined, so seeded streams are
// drawn from raw mt19937_64 output to stay identical across standard libraries.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double unit_uniform(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), unbiased by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Derives an independent stream seed from a base seed and an index (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace svdclass
