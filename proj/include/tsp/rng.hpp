#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tsp {

/// Seed for a named random stream. Each consumer draws from its own stream
/// so adding a consumer never perturbs the others.
inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view name)
{
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = seed ^ h;
    z += 0x9e3779b97f4a7c15ULL; // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view name)
{
    return std::mt19937_64(stream_seed(seed, name));
}

} // namespace tsp
