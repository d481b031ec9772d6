#pragma once

#include <cstdint>
#include <random>

namespace ficharge::detail {

/// splitmix64 mixing step; used to derive independent, schedule-free RNG
/// streams from (seed, generation, index) style keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(a) ^ b);
}

/// Deterministic stream keyed by up to three indices. Streams for distinct
/// keys are independent for all practical purposes, so work items may be
/// evaluated in any order or in parallel without changing results.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
    return std::mt19937_64(mix(mix(seed, a), b));
}

}  // namespace ficharge::detail
