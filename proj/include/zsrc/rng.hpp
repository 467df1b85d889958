#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace zsrc {

// All randomness in the toolkit flows from one master seed. Each stage derives
// its own stream seed as mix(master ^ fnv1a(stage_tag) ^ counter), so adding a
// stage never shifts the streams of the others. std::mt19937_64 is bit-exact
// across platforms; the std distributions are not, so the mapping helpers
// below are used instead of <random> distributions everywhere.

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                 std::uint64_t counter = 0) {
    return mix64(master ^ fnv1a(stage) ^ (counter * 0x9e3779b97f4a7c15ull));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform double in [0, 1).
inline double uniform_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_real(rng);
}

// Uniform integer in [0, n), n > 0. Rejection sampling keeps it unbiased and
// platform-stable.
inline std::uint64_t uniform_int(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

inline bool bernoulli(Rng& rng, double p) { return uniform_real(rng) < p; }

}  // namespace zsrc
