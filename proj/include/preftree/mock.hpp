#pragma once

// Offline stand-ins for dry runs and fixtures: a model endpoint that answers
// each prompt template with canned text, and a toy interpreter that
// understands a handful of Python statement forms.

#include <cstdint>
#include <string>
#include <vector>

#include "preftree/model_client.hpp"
#include "preftree/prompts.hpp"
#include "preftree/sandbox.hpp"
#include "preftree/tree.hpp"

namespace preftree {

enum class PromptKind {
    Actor,
    Critique,
    Judge,
    TestGen,
    ElicitCoding,
    ElicitMathText,
    RationaleToCode,
    ElicitMathTool,
    ElicitMathToolModular,
    Unknown
};

// Matches the last user message against the first line of each template.
PromptKind classify_prompt(const std::vector<ChatMessage>& messages, const PromptTemplates& templates);

// Toy execution. Per line: print(input()) echoes the next stdin line,
// print(sys.stdin.read()) echoes all stdin, print(<literal>) prints the
// literal, raise X / 1/0 produce a traceback, "while True" times out,
// exit(N) sets the exit status; anything else is ignored. The syntax check
// rejects unbalanced brackets or quotes, "(:" and def/if/for/while lines
// without a trailing colon.
ExecResponse toy_execute(const ExecRequest& req);
SandboxPtr make_toy_sandbox();

struct MockSpec {
    std::string model = "mock";
    // Chance that an actor sample (or a judge verdict) is correct.
    double correct_probability = 0.5;
    std::uint64_t seed = 0;
};

// Body the mock emits for a correct or a wrong attempt at inst.
std::string mock_action_body(const Instruction& inst, bool correct);

// Answers actor prompts with correct or wrong attempts drawn per sample from
// (seed, conversation, call ordinal); elicitation prompts always get a
// correct attempt. The instruction is found by its prompt text in corpus.
ClientPtr make_mock_client(const MockSpec& spec, std::vector<Instruction> corpus,
                           PromptTemplates templates = PromptTemplates::builtin());

}  // namespace preftree
