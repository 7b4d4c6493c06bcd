#pragma once

// Train/test overlap detection: word n-gram matching through a fingerprint
// index (every hit re-verified on raw tokens) and exact byte-substring
// matching for code.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "preftree/hash.hpp"
#include "preftree/tree.hpp"

namespace preftree {

// Lowercased words. Unicode whitespace and punctuation separate tokens and are
// dropped; letters and digits of any script are kept. Invalid UTF-8 bytes act
// as separators.
std::vector<std::string> tokenize(std::string_view text);

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

struct TestDoc {
    std::string id;
    std::string text;
};

struct Match {
    std::string test_doc;
    std::size_t train_off = 0;
    std::size_t test_off = 0;
    // Tokens for n-gram matches, bytes for substring matches.
    std::size_t len = 0;
    std::string kind = "ngram";
    friend bool operator==(const Match&, const Match&) = default;
};

struct MatchReport {
    std::string id;
    bool contaminated = false;
    std::vector<Match> matches;
};

nlohmann::json to_json(const MatchReport& r);

class NgramIndex {
public:
    // Tokenizes and fingerprints every document using up to jobs threads.
    static NgramIndex build(const std::vector<TestDoc>& docs, std::size_t n = 8, std::size_t jobs = 1,
                            Tokenizer tokenizer = tokenize);

    std::size_t n() const { return n_; }
    // Windows inserted, before deduplication.
    std::size_t window_count() const { return windows_; }
    std::size_t distinct_fingerprints() const { return heads_.size(); }
    const Tokenizer& tokenizer() const { return tokenizer_; }

    // Every verified window hit, merged into maximal diagonal runs per test doc.
    MatchReport check(const std::string& id, std::string_view text) const;

private:
    struct Occurrence {
        std::uint32_t doc;
        std::uint32_t offset;
        std::uint32_t next;
    };
    static constexpr std::uint32_t kEnd = 0xffffffffu;

    std::size_t n_ = 8;
    std::size_t windows_ = 0;
    Tokenizer tokenizer_;
    std::vector<std::string> doc_ids_;
    std::vector<std::vector<std::string>> doc_tokens_;
    // First and last occurrence of each fingerprint.
    std::unordered_map<Hash128, std::pair<std::uint32_t, std::uint32_t>, Hash128Hasher> heads_;
    std::vector<Occurrence> occurrences_;
};

// Fingerprints of each length-n token window, in order.
std::vector<Hash128> window_fingerprints(const std::vector<std::string>& tokens, std::size_t n);

// Every maximal common byte substring of length >= min_len between train and
// each test doc. Maximal means it cannot be extended left or right.
std::vector<Match> substring_match(std::string_view train, const std::vector<TestDoc>& tests,
                                   std::size_t min_len = 50);

struct DecontamConfig {
    std::size_t n = 8;
    std::size_t min_len = 50;
    std::size_t jobs = 1;
};

struct FilterResult {
    std::vector<Instruction> kept;
    std::vector<Instruction> removed;
    // One per input instruction, in input order.
    std::vector<MatchReport> reports;
};

// n-gram check against the test sets of the instruction's own task; coding
// instructions are also substring-matched against code_corpus. Throws
// ConfigError when a task has no test-set entry.
FilterResult filter_corpus(const std::vector<Instruction>& instructions,
                           const std::map<Task, std::vector<TestDoc>>& test_sets,
                           const std::vector<TestDoc>& code_corpus, const DecontamConfig& cfg = {});

}  // namespace preftree
