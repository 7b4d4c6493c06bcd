#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace preftree {

struct Hash128 {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;

    friend bool operator==(const Hash128&, const Hash128&) = default;
    friend auto operator<=>(const Hash128&, const Hash128&) = default;
};

struct Hash128Hasher {
    std::size_t operator()(const Hash128& h) const noexcept { return static_cast<std::size_t>(h.lo ^ (h.hi * 0x9e3779b97f4a7c15ULL)); }
};

// MurmurHash3 x64 128-bit variant.
Hash128 murmur3_128(const void* data, std::size_t len, std::uint64_t seed = 0);

inline Hash128 murmur3_128(std::string_view s, std::uint64_t seed = 0) {
    return murmur3_128(s.data(), s.size(), seed);
}

inline std::uint64_t hash64(std::string_view s, std::uint64_t seed = 0) {
    return murmur3_128(s, seed).lo;
}

std::string to_hex(std::uint64_t v);

// Mixes a global seed with a string key (instruction ids, pattern names).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

}  // namespace preftree
