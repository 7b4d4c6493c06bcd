#pragma once

// JSONL persistence: one tree (or instruction) per line, UTF-8.

#include <iosfwd>
#include <vector>

#include "json.hpp"

#include "preftree/tree.hpp"

namespace preftree {

nlohmann::json to_json(const TestCase& tc);
nlohmann::json to_json(const Instruction& inst);
nlohmann::json to_json(const Observation& obs);
nlohmann::json to_json(const ActionNode& node);
nlohmann::json to_json(const PreferenceTree& tree);

// These throw std::invalid_argument (or nlohmann exceptions) on schema mismatch.
TestCase test_case_from_json(const nlohmann::json& j);
Instruction instruction_from_json(const nlohmann::json& j);
ActionNode node_from_json(const nlohmann::json& j);
PreferenceTree tree_from_json(const nlohmann::json& j);

void save_trees(const std::vector<PreferenceTree>& trees, std::ostream& sink);

// Throws ParseError naming the line for malformed JSON or schema errors, and
// ValidationError (with line) when a tree breaks its invariants.
std::vector<PreferenceTree> load_trees(std::istream& source);

void save_instructions(const std::vector<Instruction>& instructions, std::ostream& sink);

}  // namespace preftree
