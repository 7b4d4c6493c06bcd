#pragma once

// Preference pairs and SFT records extracted from built trees.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "preftree/model_client.hpp"
#include "preftree/tree.hpp"

namespace preftree {

struct AugmentConfig {
    std::size_t product_cap = 10;
    std::size_t max_pairs = 9;
    std::size_t max_occurrence = 3;
    std::uint64_t seed = 0;
};

// Same-parent (correct, incorrect) siblings per turn, context = path to the parent.
std::vector<ActionPair> multiturn_pairs(const PreferenceTree& tree);

// Main-chain nodes (origin other than Additional), ordered by (turn, id).
std::vector<std::string> chain_correct(const PreferenceTree& tree);
std::vector<std::string> chain_incorrect(const PreferenceTree& tree);

// Cross-turn pairs from the main chain. Empty when |C|*|I| exceeds the cap;
// otherwise up to max_pairs draws without replacement, rejecting any draw that
// would use a node more than max_occurrence times, with at most 10*max_pairs
// draws. Rng seeded from (cfg.seed, instruction id). Context is empty: the
// pair compares two single-turn actions.
std::vector<ActionPair> augment_pairs(const PreferenceTree& tree, const AugmentConfig& cfg);

// Pairs recorded for hard problems, one per extra_pairs entry.
std::vector<ActionPair> additional_pairs(const PreferenceTree& tree);

enum class SftMode { LeafOnly, AllCorrect };

struct SftRecord {
    std::string prompt;
    std::string response;
    std::string instruction_id;
    std::string node_id;
    int turn = 1;
    friend bool operator==(const SftRecord&, const SftRecord&) = default;
};

// LeafOnly: correct main-chain leaves. AllCorrect: also Additional correct nodes.
// Deduplicated by (prompt, response), first occurrence kept.
std::vector<SftRecord> export_sft(const std::vector<PreferenceTree>& trees, SftMode mode = SftMode::LeafOnly);

struct PairRecord {
    ActionPair pair;
    std::vector<ChatMessage> context;
    std::string chosen;
    std::string rejected;
};

// Instruction as the first user message, then per context turn the action as
// an assistant message and its observation and critique as a user message.
std::vector<ChatMessage> render_context(const Instruction& inst, const std::vector<ContextTurn>& context);

// Multi-turn, then augmented, then additional pairs, tree by tree.
// Trees whose verdicts came from a judge model are skipped.
std::vector<PairRecord> export_preference(const std::vector<PreferenceTree>& trees, const AugmentConfig& cfg);

nlohmann::json to_json(const SftRecord& r);
nlohmann::json to_json(const PairRecord& r);

}  // namespace preftree
