#include <set>
#include <string>

#include "doctest.h"
#include "preftree/hash.hpp"

using namespace preftree;

// Vectors from an independent implementation of the reference algorithm; the
// fox vector is the widely published one.
TEST_CASE("murmur3 x64 128 known vectors") {
    struct V {
        std::string data;
        std::uint64_t seed, lo, hi;
    };
    const V vectors[] = {
        {"", 0, 0, 0},
        {"hello", 0, 0xcbd8a7b341bd9b02ULL, 0x5b1e906a48ae1d19ULL},
        {"The quick brown fox jumps over the lazy dog", 0, 0xe34bbc7bbc071b6cULL, 0x7a433ca9c49a9347ULL},
        {"abcdefghijklmnop", 42, 0x013c4ef9eb92b10cULL, 0x0e5883d2952bf3beULL},
        {std::string(31, 'x'), 7, 0x46787b90b8a7acbfULL, 0x024fc88cb097dbe6ULL},
        {std::string("\xff\x00\x80" "abc", 6), 123456789, 0x7afd00838d2c57ffULL, 0xc12d37caae1b2712ULL},
    };
    for (const auto& v : vectors) {
        CAPTURE(v.data);
        const auto h = murmur3_128(v.data, v.seed);
        CHECK(h.lo == v.lo);
        CHECK(h.hi == v.hi);
    }
}

TEST_CASE("every tail length hashes distinctly") {
    std::set<Hash128> seen;
    std::string s;
    for (int i = 0; i < 64; ++i) {
        seen.insert(murmur3_128(s));
        s.push_back(static_cast<char>('a' + i % 26));
    }
    CHECK(seen.size() == 64);
}

TEST_CASE("to_hex pads to 16 digits") {
    CHECK(to_hex(0) == "0000000000000000");
    CHECK(to_hex(0xabcULL) == "0000000000000abc");
    CHECK(to_hex(~0ULL) == "ffffffffffffffff");
}

TEST_CASE("derive_seed depends on both inputs") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
}
