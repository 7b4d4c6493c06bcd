#include <algorithm>
#include <set>
#include <tuple>

#include "doctest.h"
#include "mocks.hpp"
#include "preftree/decontam.hpp"
#include "preftree/errors.hpp"

using namespace preftree;

namespace {

using Tokens = std::vector<std::string>;

// All maximal diagonal runs of equal n-windows, by exhaustive comparison.
std::vector<Match> ngram_oracle(const Tokens& train, const std::vector<std::pair<std::string, Tokens>>& docs,
                                std::size_t n) {
    std::vector<Match> out;
    if (train.size() < n) return out;
    for (const auto& [id, test] : docs) {
        if (test.size() < n) continue;
        const auto hit = [&](std::size_t i, std::size_t j) {
            if (i + n > train.size() || j + n > test.size()) return false;
            for (std::size_t k = 0; k < n; ++k) {
                if (train[i + k] != test[j + k]) return false;
            }
            return true;
        };
        for (std::size_t i = 0; i + n <= train.size(); ++i) {
            for (std::size_t j = 0; j + n <= test.size(); ++j) {
                if (!hit(i, j) || (i > 0 && j > 0 && hit(i - 1, j - 1))) continue;
                std::size_t run = 1;
                while (hit(i + run, j + run)) ++run;
                out.push_back({id, i, j, run + n - 1, "ngram"});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Match& x, const Match& y) {
        return std::tie(x.train_off, x.test_doc, x.test_off) < std::tie(y.train_off, y.test_doc, y.test_off);
    });
    return out;
}

// Longest-common-extension table; a maximal match starts where the left
// characters differ (or at a string start).
std::vector<Match> substring_oracle(const std::string& train, const std::vector<TestDoc>& tests, std::size_t min_len) {
    std::vector<Match> out;
    for (const auto& doc : tests) {
        const auto& test = doc.text;
        std::vector<std::vector<std::size_t>> ext(train.size() + 1, std::vector<std::size_t>(test.size() + 1, 0));
        for (std::size_t i = train.size(); i-- > 0;) {
            for (std::size_t j = test.size(); j-- > 0;) {
                ext[i][j] = train[i] == test[j] ? ext[i + 1][j + 1] + 1 : 0;
            }
        }
        for (std::size_t i = 0; i < train.size(); ++i) {
            for (std::size_t j = 0; j < test.size(); ++j) {
                if (ext[i][j] < min_len) continue;
                if (i > 0 && j > 0 && train[i - 1] == test[j - 1]) continue;
                out.push_back({doc.id, i, j, ext[i][j], "substring"});
            }
        }
    }
    return out;
}

std::vector<Match> sorted(std::vector<Match> m) {
    std::sort(m.begin(), m.end(), [](const Match& x, const Match& y) {
        return std::tie(x.test_doc, x.train_off, x.test_off, x.len) < std::tie(y.test_doc, y.train_off, y.test_off, y.len);
    });
    return m;
}

std::string join(const Tokens& t) {
    std::string s;
    for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
    return s;
}

Tokens random_words(Rng& rng, std::size_t count, std::size_t vocab) {
    Tokens t;
    for (std::size_t i = 0; i < count; ++i) t.push_back("w" + std::to_string(rng.uniform(vocab)));
    return t;
}

}  // namespace

TEST_CASE("tokenizer: case, punctuation and scripts") {
    CHECK(tokenize("Hello, World!  It's 42.") == Tokens{"hello", "world", "it", "s", "42"});
    CHECK(tokenize("") == Tokens{});
    CHECK(tokenize("  ...  ") == Tokens{});
    CHECK(tokenize("ÀÉÎ Café") == Tokens{"àéî", "café"});
    CHECK(tokenize("ПРИВЕТ, мир") == Tokens{"привет", "мир"});
    CHECK(tokenize("ΑΒΓ δ") == Tokens{"αβγ", "δ"});
    CHECK(tokenize("数学题　答案") == Tokens{"数学题", "答案"});
    CHECK(tokenize("a\xe2\x80\x94" "b") == Tokens{"a", "b"});          // em dash
    CHECK(tokenize("a\xc2\xa0" "b") == Tokens{"a", "b"});              // no-break space
    CHECK(tokenize("\xe2\x80\x9cquoted\xe2\x80\x9d") == Tokens{"quoted"});
    CHECK(tokenize("\xef\xbc\xa1\xef\xbc\xa2") == Tokens{"\xef\xbd\x81\xef\xbd\x82"});  // fullwidth AB
    CHECK(tokenize("x\xffy\xc3") == Tokens{"x", "y"});                // invalid bytes split
    CHECK(tokenize("\xc0\xaf" "ok") == Tokens{"ok"});                 // overlong encoding
    CHECK(tokenize("ŁÓDŹ") == Tokens{"łódź"});
}

TEST_CASE("window fingerprints") {
    const Tokens t = {"a", "b", "c", "a", "b", "c", "a"};
    const auto f = window_fingerprints(t, 3);
    REQUIRE(f.size() == 5);
    CHECK(f[0] == f[3]);
    CHECK(f[0] != f[1]);
    CHECK(f[1] != f[2]);
    CHECK(window_fingerprints(t, 8).empty());
    // The window length is part of the fingerprint.
    CHECK(window_fingerprints({"a", "b"}, 2)[0] != window_fingerprints({"a", "b", "c"}, 3)[0]);
}

TEST_CASE("n-gram index agrees with exhaustive matching") {
    Rng rng(77);
    for (int round = 0; round < 150; ++round) {
        const std::size_t n = std::vector<std::size_t>{2, 3, 5, 8}[rng.uniform(4)];
        const std::size_t vocab = 2 + rng.uniform(6);
        std::vector<TestDoc> docs;
        std::vector<std::pair<std::string, Tokens>> oracle_docs;
        const auto n_docs = 1 + rng.uniform(4);
        for (std::uint64_t d = 0; d < n_docs; ++d) {
            auto words = random_words(rng, rng.uniform(40), vocab);
            docs.push_back({"d" + std::to_string(d), join(words)});
            oracle_docs.emplace_back(docs.back().id, words);
        }
        auto train = random_words(rng, rng.uniform(60), vocab);
        // Plant a copy of a test span so long runs occur.
        const auto& src = oracle_docs[rng.uniform(oracle_docs.size())].second;
        if (src.size() > n && !train.empty()) {
            const auto a = rng.uniform(src.size() - n);
            const auto at = rng.uniform(train.size());
            train.insert(train.begin() + static_cast<std::ptrdiff_t>(at), src.begin() + static_cast<std::ptrdiff_t>(a),
                         src.end());
        }
        const auto idx = NgramIndex::build(docs, n, 1 + rng.uniform(3));
        const auto report = idx.check("x", join(train));
        const auto expected = ngram_oracle(train, oracle_docs, n);
        REQUIRE(report.matches == expected);
        CHECK(report.contaminated == !expected.empty());
        CHECK(report.id == "x");
    }
}

TEST_CASE("n-gram index: thresholds and accounting") {
    const std::string test = "the quick brown fox jumps over the lazy dog near the river bank";
    const auto idx = NgramIndex::build({{"t", test}}, 8);
    CHECK(idx.window_count() == 13 - 8 + 1);
    CHECK(idx.distinct_fingerprints() == 6);
    // Seven shared words: not a hit.
    CHECK_FALSE(idx.check("a", "Quick brown fox jumps over the lazy cat").contaminated);
    // Eight shared words, different case and punctuation: a hit of length 8.
    const auto r = idx.check("b", "QUICK, brown; fox... jumps over THE lazy dog!");
    REQUIRE(r.matches.size() == 1);
    CHECK(r.matches[0].len == 8);
    CHECK(r.matches[0].train_off == 0);
    CHECK(r.matches[0].test_off == 1);
    CHECK(to_json(r)["matches"][0]["kind"] == "ngram");
}

TEST_CASE("n-gram index is independent of the job count") {
    Rng rng(4);
    std::vector<TestDoc> docs;
    for (int d = 0; d < 40; ++d) docs.push_back({"d" + std::to_string(d), join(random_words(rng, 200, 6))});
    const auto a = NgramIndex::build(docs, 3, 1);
    const auto b = NgramIndex::build(docs, 3, 4);
    CHECK(a.window_count() == b.window_count());
    for (int i = 0; i < 20; ++i) {
        const auto text = join(random_words(rng, 50, 6));
        CHECK(a.check("q", text).matches == b.check("q", text).matches);
    }
}

TEST_CASE("n-gram verification uses the index tokenizer") {
    // A tokenizer that maps every word to the same token makes every window equal.
    Tokenizer flat = [](std::string_view s) {
        Tokens t = tokenize(s);
        for (auto& w : t) w = "x";
        return t;
    };
    const auto idx = NgramIndex::build({{"t", "a b c"}}, 3, 1, flat);
    CHECK(idx.check("q", "d e f").contaminated);
    CHECK_FALSE(NgramIndex::build({{"t", "a b c"}}, 3).check("q", "d e f").contaminated);
    CHECK_THROWS_AS(NgramIndex::build({}, 0), ConfigError);
}

TEST_CASE("substring matching agrees with the dynamic-programming oracle") {
    Rng rng(99);
    for (int round = 0; round < 300; ++round) {
        const std::size_t min_len = 2 + rng.uniform(7);
        const std::string alphabet = rng.bernoulli(0.5) ? "ab" : "abcd\n ";
        auto random_text = [&](std::size_t len) {
            std::string s;
            for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.uniform(alphabet.size())];
            return s;
        };
        std::vector<TestDoc> tests;
        for (std::uint64_t d = 0, nd = 1 + rng.uniform(3); d < nd; ++d) {
            tests.push_back({"t" + std::to_string(d), random_text(rng.uniform(80))});
        }
        const auto train = random_text(rng.uniform(120));
        CHECK(sorted(substring_match(train, tests, min_len)) == sorted(substring_oracle(train, tests, min_len)));
    }
    CHECK_THROWS_AS(substring_match("abc", {}, 0), ConfigError);
}

TEST_CASE("substring matching on code") {
    const std::string leaked = "def solve(n):\n    return sum(i * i for i in range(n + 1)) % 1000000007\n";
    const std::vector<TestDoc> corpus = {{"p1", "# reference\n" + leaked + "print(solve(int(input())))\n"}};
    const auto m = substring_match("import sys\n" + leaked, corpus, 50);
    REQUIRE(m.size() == 1);
    // Both copies follow a newline, so the maximal match starts one byte earlier.
    CHECK(m[0].train_off == 10);
    CHECK(m[0].test_off == 11);
    CHECK(m[0].len == leaked.size() + 1);
    CHECK(m[0].kind == "substring");
    CHECK(substring_match(leaked.substr(0, 49), corpus, 50).empty());
}

TEST_CASE("filter_corpus routes by task and checks code solutions") {
    const std::string leaked_math = "a farmer has seventeen sheep and all but nine run away how many are left";
    const std::string leaked_code =
        "for _ in range(int(input())):\n    a, b = map(int, input().split())\n    print(a * b % 998244353)\n";
    std::map<Task, std::vector<TestDoc>> sets = {
        {Task::Math, {{"gsm-1", "Question: " + leaked_math + "?"}}},
        {Task::Coding, {{"he-1", "write a function that adds two numbers and returns the result"}}}};
    const std::vector<TestDoc> code = {{"cc-7", leaked_code}};

    auto m1 = fixtures::math_instruction("m1", "9");
    m1.prompt = "A farmer has seventeen sheep and all but nine run away. How many are left?";
    auto m2 = fixtures::math_instruction("m2", "3");
    auto c1 = fixtures::coding_instruction("c1", {"import sys\n" + leaked_code}, {});
    auto c2 = fixtures::coding_instruction("c2", {"print(1)"}, {});
    // The coding prompt shares words with the math test doc only; tasks are not mixed.
    c2.prompt = leaked_math;

    const auto r = filter_corpus({m1, m2, c1, c2}, sets, code);
    REQUIRE(r.reports.size() == 4);
    CHECK(r.reports[0].contaminated);
    CHECK(r.reports[0].matches[0].test_doc == "gsm-1");
    CHECK_FALSE(r.reports[1].contaminated);
    CHECK(r.reports[2].contaminated);
    CHECK(r.reports[2].matches[0].kind == "substring");
    CHECK(r.reports[2].matches[0].test_doc == "cc-7");
    CHECK_FALSE(r.reports[3].contaminated);
    REQUIRE(r.kept.size() == 2);
    CHECK(r.kept[0].id == "m2");
    CHECK(r.kept[1].id == "c2");
    REQUIRE(r.removed.size() == 2);

    DecontamConfig par;
    par.jobs = 3;
    const auto r2 = filter_corpus({m1, m2, c1, c2}, sets, code, par);
    for (std::size_t i = 0; i < 4; ++i) CHECK(r2.reports[i].matches == r.reports[i].matches);

    auto logic = fixtures::math_instruction("l1", "yes");
    logic.task = Task::Logic;
    CHECK_THROWS_AS(filter_corpus({logic}, sets, code), ConfigError);
}
