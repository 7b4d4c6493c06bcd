#pragma once

// Correct/incorrect action sampling for one turn of a preference tree.
//
// Correct actions come from an escalating ladder: budget.samples_per_round
// draws per round, up to budget.max_rounds rounds, round r using tier
// min(r, tiers-1). If the ladder comes up empty the actor is shown the ground
// truth (solution code, masked rationale, or rationale translated to code).
// Incorrect actions come from one uniformly chosen model of a diverse pool.
// Code that fails the syntax check is discarded on both sides.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "preftree/engine.hpp"

namespace preftree {

struct LadderRound {
    std::size_t tier = 0;
    int samples = 0;
    int n_correct = 0;
};

struct LadderReport {
    std::string instruction_id;
    int turn = 1;
    std::vector<LadderRound> rounds;
    bool elicited = false;
    int elicitation_attempts = 0;
    bool correct_found = false;
    bool incorrect_found = false;

    int samples_used() const;
};

// {"instruction_id","turn","rounds":[{"tier","samples","n_correct"}],"elicited",...}
nlohmann::json to_json(const LadderReport& r);

// A sampled action with its verdict; node.correct and node.observation are filled in.
struct Candidate {
    ActionNode node;
    EvalVerdict verdict;
};

struct CorrectSample {
    std::optional<Candidate> action;
    LadderReport report;
    // True when the ladder was exhausted and ground-truth elicitation ran.
    bool reached_elicitation = false;
};

struct ElicitResult {
    std::optional<Candidate> action;
    std::string reason;
    int attempts = 0;
};

struct MaskResult {
    std::string text;
    std::size_t masked = 0;
    std::optional<std::string> warning;
};

inline constexpr std::string_view kMaskToken = "<mask>";

// Replaces each standalone token equal to final_answer (numerically, when it
// parses as a plain number; otherwise by exact token) with "<mask>".
MaskResult mask_answer_numbers(std::string_view rationale, std::string_view final_answer);

// Compile-only check in the sandbox. Throws SandboxError when the worker is
// unavailable rather than reporting false.
bool syntax_check(Sandbox& sandbox, const std::string& code, int timeout_ms = 10000);

class Sampler {
public:
    // tiers and pool fall back to the engine config when empty.
    explicit Sampler(const Engine& engine, std::vector<ClientPtr> tiers = {}, std::vector<ClientPtr> pool = {});

    CorrectSample sample_correct(const Instruction& inst, const std::vector<ActionNode>& history, Rng& rng) const;

    // solution overrides which reference solution grounds a coding elicitation.
    ElicitResult elicit_with_ground_truth(const Instruction& inst, const std::vector<ActionNode>& history,
                                          ModelClient& client, Rng& rng,
                                          const std::string* solution = nullptr) const;

    std::optional<Candidate> sample_incorrect(const Instruction& inst, const std::vector<ActionNode>& history,
                                              Rng& rng) const;

    // One (correct, incorrect) pair per reference solution, for instructions that
    // needed elicitation and carry at least two solutions.
    std::vector<std::pair<Candidate, Candidate>> extra_pairs_for_hard(const Instruction& inst,
                                                                      const std::vector<ActionNode>& history,
                                                                      Rng& rng) const;

    ModelClient& elicitor() const;
    const std::vector<ClientPtr>& tiers() const { return tiers_; }
    const std::vector<ClientPtr>& pool() const { return pool_; }

private:
    // Evaluates candidates in order; code failing the syntax check is dropped.
    std::vector<Candidate> screen(const Instruction& inst, std::vector<ActionNode> actions) const;
    std::optional<Candidate> elicit_once(const Instruction& inst, const std::vector<ActionNode>& history,
                                         ModelClient& client, Rng& rng, const std::string* solution,
                                         std::string& reason) const;

    const Engine& engine_;
    std::vector<ClientPtr> tiers_;
    std::vector<ClientPtr> pool_;
};

}  // namespace preftree
