#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace fedcorr {

using Rng = std::mt19937_64;

inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Named sub-seed derivation: every stage draws its randomness from
// derive_seed(master, tag), so changing one stage's behavior never perturbs
// another stage's stream. Tags are documented in the README.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag)
{
    return splitmix64(master ^ fnv1a64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index)
{
    return splitmix64(derive_seed(master, tag) + 0x632be59bd9b4e019ull * (index + 1));
}

inline Rng make_rng(std::uint64_t seed)
{
    return Rng(seed);
}

} // namespace fedcorr
