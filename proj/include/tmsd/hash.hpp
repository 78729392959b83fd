#pragma once

#include <cstdint>
#include <vector>

namespace tmsd {

// FNV-1a over the little-endian bytes of each token id. Platform independent,
// so anything seeded from it (NoisyLM) reproduces across runs and machines.
inline std::uint64_t fnv1a_tokens(const std::vector<std::uint32_t>& tokens) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint32_t t : tokens) {
        for (int shift = 0; shift < 32; shift += 8) {
            h ^= (t >> shift) & 0xffu;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct TokenSeqHash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const noexcept {
        return static_cast<std::size_t>(fnv1a_tokens(v));
    }
};

}  // namespace tmsd
