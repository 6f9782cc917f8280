#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace radseq {

/// splitmix64 mixing step; stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed for a (base, stream tag, index) triple.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index) {
    return splitmix64(splitmix64(base ^ splitmix64(tag + 1)) ^ index);
}

/// Fisher-Yates shuffle driven directly by the engine's output stream, so the
/// permutation does not depend on the standard library's distribution
/// implementation.
template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

/// FNV-1a 64-bit hash.
inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                             std::uint64_t state = 0xcbf29ce484222325ULL) {
    for (unsigned char b : bytes) {
        state ^= b;
        state *= 0x100000001b3ULL;
    }
    return state;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

inline std::string to_hex(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace radseq
