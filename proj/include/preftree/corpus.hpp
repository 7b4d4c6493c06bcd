#pragma once

// Instruction ingestion, per-dataset selection filters, probe screening and
// corpus statistics.

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "preftree/engine.hpp"
#include "preftree/tree.hpp"

namespace preftree {

struct IngestOptions {
    // Used when a record lacks the field.
    std::optional<std::string> dataset;
    std::optional<Task> task;
    std::optional<bool> tool_mode;
};

struct RecordError {
    std::size_t line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<Instruction> instructions;
    std::vector<RecordError> errors;
};

// One JSON object per line. Ground truth may be nested under "ground_truth" or
// given as top-level answer/rationale/solutions/test_cases. Other top-level
// fields go to metadata. Bad records are reported and skipped.
IngestResult ingest(std::istream& in, const IngestOptions& opts = {});

struct FilterOutcome {
    std::vector<Instruction> kept;
    std::vector<std::string> warnings;
};

// MathQA records: at most per_pattern per metadata "formula_pattern", preferring
// rare metadata "category" values; seeded shuffle breaks ties. Other datasets
// pass through. Input order is kept.
std::vector<Instruction> select_mathqa(const std::vector<Instruction>& instructions, std::uint64_t seed = 0,
                                       std::size_t per_pattern = 5);

// NumGLUE records with metadata "task_id" 5, 6 or 7 are dropped.
std::vector<Instruction> filter_numglue(const std::vector<Instruction>& instructions);

// TabMWP records keep metadata "difficulty" 4 or 5; missing or unreadable
// difficulty drops the record with a warning.
FilterOutcome filter_tabmwp(const std::vector<Instruction>& instructions);

// Keeps instructions the probe model fails on all k attempts.
std::vector<Instruction> filter_by_probe_failure(const std::vector<Instruction>& instructions, const Engine& engine,
                                                 ModelClient& probe, int k = 1, std::uint64_t seed = 0,
                                                 std::size_t jobs = 1);

using TokenCounter = std::function<std::size_t(std::string_view)>;

// Word tokens as split by the decontamination tokenizer.
std::size_t count_word_tokens(std::string_view text);

struct StatsRow {
    Task task = Task::Math;
    bool interaction = true;
    bool tool_mode = false;
    std::size_t n_instructions = 0;
    // Trajectories by leaf turn, T1..T5.
    std::array<std::size_t, kMaxTurns> turns{};
    std::size_t n_trajectories = 0;
    std::size_t total_tokens = 0;
    std::size_t total_pairs = 0;
    std::size_t n_correct = 0;

    double tokens_per_trajectory() const;
    double trajectories_per_instruction() const;
};

struct CorpusStats {
    // Ordered by (task, interaction desc, tool_mode desc).
    std::vector<StatsRow> rows;
    StatsRow total;
};

// Rows grouped by task, interaction (max_depth > 1) and tool mode. Pairs are
// attributed through their instruction id.
CorpusStats corpus_stats(const std::vector<PreferenceTree>& trees, const std::vector<ActionPair>& pairs,
                         const TokenCounter& counter = count_word_tokens);

nlohmann::json to_json(const CorpusStats& s);
std::string format_table(const CorpusStats& s);

}  // namespace preftree
