#pragma once

// One turn of actor -> environment -> critique, plus test-case generation.
// The engine holds only shared, thread-safe collaborators (clients, sandbox),
// so a single instance serves concurrent tree builders.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "preftree/model_client.hpp"
#include "preftree/prompts.hpp"
#include "preftree/rng.hpp"
#include "preftree/sandbox.hpp"
#include "preftree/text.hpp"
#include "preftree/tree.hpp"

namespace preftree {

struct LadderBudget {
    int samples_per_round = 20;
    int max_rounds = 3;
};

struct EngineConfig {
    ClientPtr actor;
    ClientPtr critic;
    ClientPtr judge;           // optional; corpora without tests or answers
    ClientPtr elicitor;        // optional; defaults to the first tier, then the actor
    ClientPtr test_generator;  // optional; defaults to the critic
    std::vector<ClientPtr> tiers;           // cheap -> strong
    std::vector<ClientPtr> incorrect_pool;  // rejected-response diversity
    SandboxPtr sandbox;
    std::size_t sandbox_pool_size = 4;
    int exec_timeout_ms = 10000;
    int memory_mb = 512;
    int max_depth = kMaxTurns;
    std::uint64_t seed = 0;
    SamplingParams sampling;
    LadderBudget budget;
    PromptTemplates templates = PromptTemplates::builtin();
    StepMarker step_marker;

    // Throws ConfigError.
    void validate() const;
};

struct TestOutcome {
    bool passed = false;
    std::string actual;
    std::optional<std::string> traceback;
    bool timed_out = false;
};

struct EvalVerdict {
    bool correct = false;
    // False for model-judged verdicts.
    bool rigorous = true;
    std::string detail;
    std::vector<TestOutcome> tests;
};

// Verdict plus the observation handed back to the actor.
struct Assessment {
    EvalVerdict verdict;
    Observation observation;
};

struct TestGenResult {
    std::vector<TestCase> cases;
    std::vector<std::string> warnings;
};

ReasoningSchema sample_schema(Rng& rng);

class Engine {
public:
    explicit Engine(EngineConfig config);

    const EngineConfig& config() const { return config_; }
    Sandbox& sandbox() const { return *config_.sandbox; }

    // System template for the schema, the instruction, then each prior turn as
    // an assistant action followed by a user message with observation + critique.
    std::vector<ChatMessage> actor_messages(const Instruction& inst, const std::vector<ActionNode>& history,
                                            ReasoningSchema schema) const;

    // One candidate per schema entry; correctness is left unset.
    std::vector<ActionNode> run_actions(const Instruction& inst, const std::vector<ActionNode>& history,
                                        ModelClient& client, const std::vector<ReasoningSchema>& schemas) const;
    ActionNode run_action(const Instruction& inst, const std::vector<ActionNode>& history, ModelClient& client,
                          ReasoningSchema schema) const;

    // Wraps a raw completion as a node at turn history.size()+1.
    ActionNode make_action(const Instruction& inst, const std::vector<ActionNode>& history, std::string body,
                           ReasoningSchema schema, const std::string& producer) const;

    EvalVerdict evaluate(const ActionNode& action, const Instruction& inst) const;
    Observation observe(const ActionNode& action, const Instruction& inst) const;
    Assessment assess(const ActionNode& action, const Instruction& inst) const;

    Critique critique(const ActionNode& action, const Observation& observation, const Instruction& inst,
                      const std::vector<ActionNode>& history, ModelClient& client) const;

    TestGenResult generate_test_cases(const Instruction& problem, const std::string& gold_solution,
                                      ModelClient& client) const;

    ExecResponse run_code(const std::string& code, const std::string& stdin_text) const;

    static std::string render_observation(const Observation& obs);
    static std::string render_ground_truth(const Instruction& inst);

private:
    EvalVerdict evaluate_with_tests(const std::string& code, const Instruction& inst) const;
    EvalVerdict evaluate_answer(const ActionNode& action, const Instruction& inst) const;
    EvalVerdict evaluate_with_judge(const ActionNode& action, const Instruction& inst) const;

    EngineConfig config_;
};

}  // namespace preftree
