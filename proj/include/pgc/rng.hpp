#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace pgc {

using Rng = std::mt19937_64;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from an ordered list of integers. Order matters, so
/// (base, iteration, candidate) and (base, candidate, iteration) differ.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x51ed2701a3c5f00dULL;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) { return Rng(derive_seed(parts)); }

// Stream tags used with derive_seed.
enum class Stream : std::uint64_t {
    env_reset = 1,
    policy = 2,
    attack = 3,
    init = 4,
    shuffle = 5,
    cem = 6,
};

}  // namespace pgc
