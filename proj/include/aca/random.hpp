#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace aca {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Seed of sub-stream `index` under `master`. Pure function of its inputs, so
/// replicas can run in any order: derive_seed(s, b) = splitmix64(splitmix64(s) ^ splitmix64(b + 1)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept
{
    return splitmix64(splitmix64(master) ^ splitmix64(index + 1));
}

/// FNV-1a, used to key seeds by stable names (user id, subset).
constexpr std::uint64_t stable_hash(std::string_view text) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace aca
