#pragma once

// Whole-tree construction. Each turn samples a (correct, incorrect) pair under
// the current context; the correct node is sealed as a leaf and the incorrect
// one, with its observation and critique, becomes the context for the next turn.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "preftree/engine.hpp"
#include "preftree/sampling.hpp"

namespace preftree {

struct BuildResult {
    PreferenceTree tree;
    std::vector<LadderReport> audit;
    std::vector<std::string> warnings;
};

// Stops after a turn with no incorrect action, or with neither side found.
// A turn with only an incorrect action still expands.
BuildResult build_tree(const Instruction& inst, const Engine& engine, const Sampler& sampler, Rng& rng);

struct BatchItem {
    std::string instruction_id;
    std::optional<BuildResult> result;
    std::string error;
};

// Builds every tree with up to jobs workers. Tree i uses
// Rng(derive_seed(seed, id)), so results do not depend on jobs. Errors are
// captured per item; output order follows the input.
std::vector<BatchItem> build_batch(const std::vector<Instruction>& instructions, const Engine& engine,
                                   const Sampler& sampler, std::uint64_t seed, std::size_t jobs);

}  // namespace preftree
