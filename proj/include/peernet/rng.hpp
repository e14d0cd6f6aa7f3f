#ifndef PEERNET_RNG_HPP
#define PEERNET_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace peernet {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a. Used for stage-seed derivation and content hashes that must
/// be stable across runs and processes.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Per-stage seed from a global seed, so a stage can be re-run alone and still
/// see the same random stream it saw inside the full pipeline.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
    return splitmix64(global_seed ^ fnv1a(stage));
}

inline double uniform01(Rng& rng) {
    // 53 random bits -> [0, 1)
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(rng);
}

} // namespace peernet

#endif // PEERNET_RNG_HPP
