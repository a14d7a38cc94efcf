#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

// Distribution helpers with a fixed algorithm, so seeded output does not
// depend on the standard library's distribution implementations.
namespace cadclust::rnd {

using Engine = std::mt19937_64;
__extension__ using u128 = unsigned __int128;

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n), n > 0 (multiply-shift, bias below 2^-64 * n).
inline std::size_t uniform_index(Engine& rng, std::size_t n) {
    return static_cast<std::size_t>((static_cast<u128>(rng()) * n) >> 64);
}

/// splitmix64 finalizer, used to derive child seeds.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace cadclust::rnd
