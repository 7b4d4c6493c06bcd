#pragma once

// Shared test helpers: instruction builders, prompt-aware scripted clients,
// a random valid-tree generator and the augmentation reference.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "preftree/engine.hpp"
#include "preftree/mock.hpp"
#include "preftree/pairs.hpp"
#include "preftree/rng.hpp"
#include "preftree/tree.hpp"

namespace fixtures {

using namespace preftree;

Instruction math_instruction(const std::string& id, const std::string& answer,
                             std::optional<std::string> rationale = std::nullopt, bool tool_mode = false);
Instruction coding_instruction(const std::string& id, std::vector<std::string> solutions,
                               std::vector<TestCase> tests);

struct PromptInfo {
    PromptKind kind = PromptKind::Unknown;
    // 1-based turn implied by the conversation length.
    int turn = 1;
    std::uint64_t ordinal = 0;
    int index = 0;
    const std::vector<ChatMessage>* messages = nullptr;
};

using Script = std::function<std::string(const PromptInfo&)>;

ClientPtr script_client(const std::string& model, Script script,
                        PromptTemplates templates = PromptTemplates::builtin());

// Scripted actor for one instruction: correct(info) decides each actor sample;
// elicitation always succeeds; critiques and test generation get canned text.
ClientPtr scenario_client(const std::string& model, const Instruction& inst,
                          std::function<bool(const PromptInfo&)> correct);

EngineConfig stub_engine(ClientPtr actor, ClientPtr critic = nullptr);

struct RandomTreeOptions {
    int max_turns = kMaxTurns;
    // Chance that an incorrect node is expanded into the next turn.
    double expand = 0.7;
    bool additional = true;
};

// A valid tree of random shape: per parent 0-2 correct and 0-2 incorrect
// children, bodies drawn from a small vocabulary so ids collide now and then.
PreferenceTree random_tree(Rng& rng, const std::string& id, const RandomTreeOptions& opts = {});

// Straight re-statement of the augmentation rules, written without the
// library's helpers.
std::vector<ActionPair> augment_reference(const PreferenceTree& tree, const AugmentConfig& cfg);

}  // namespace fixtures
