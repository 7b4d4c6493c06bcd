#pragma once

// Domain types for preference trees: instructions at the root, model actions as
// nodes. Correct actions are leaves; incorrect actions may be expanded into the
// next turn, up to a per-tree depth cap.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace preftree {

inline constexpr int kMaxTurns = 5;

enum class Task { Math, Coding, Logic };
enum class TestCategory { Basic, Edge, Large, Given };
enum class ReasoningSchema { ChainOfThought, ModularProgramming };
enum class ContentKind { Text, Code, Mixed };

// How a node's action was obtained. Additional nodes come from the hard-problem
// pass that covers every ground-truth solution; they sit outside the main chain.
enum class NodeOrigin { Sampled, GroundTruthElicited, Additional };

enum class PairOrigin { MultiTurn, Augmented, Additional };

std::string_view to_string(Task t);
std::string_view to_string(TestCategory c);
std::string_view to_string(ReasoningSchema s);
std::string_view to_string(ContentKind k);
std::string_view to_string(NodeOrigin o);
std::string_view to_string(PairOrigin o);

// Parsers throw std::invalid_argument on unknown names.
Task parse_task(std::string_view s);
TestCategory parse_test_category(std::string_view s);
ReasoningSchema parse_schema(std::string_view s);
ContentKind parse_content_kind(std::string_view s);
NodeOrigin parse_node_origin(std::string_view s);
PairOrigin parse_pair_origin(std::string_view s);

struct TestCase {
    std::string input;
    std::string expected_output;
    TestCategory category = TestCategory::Given;

    friend bool operator==(const TestCase&, const TestCase&) = default;
};

struct GroundTruth {
    std::optional<std::string> answer;
    std::optional<std::string> rationale;
    std::vector<std::string> solutions;
    std::vector<TestCase> test_cases;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Instruction {
    std::string id;
    std::string dataset;
    Task task = Task::Math;
    bool tool_mode = false;
    std::string prompt;
    GroundTruth ground_truth;
    std::map<std::string, std::string> metadata;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

// Instructions whose correctness can only be judged by a model (no tests, no
// reference answer). Their verdicts are not rigorous enough for pair export.
bool requires_judge(const Instruction& inst);

struct Observation {
    std::optional<std::string> exec_output;
    std::optional<std::string> traceback;
    bool binary_feedback = false;
    bool timed_out = false;

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct Critique {
    std::string text;
    std::string author;

    friend bool operator==(const Critique&, const Critique&) = default;
};

struct ActionNode {
    std::string id;
    std::optional<std::string> parent_id;
    int turn = 1;
    ContentKind content_kind = ContentKind::Text;
    std::string body;
    ReasoningSchema schema = ReasoningSchema::ChainOfThought;
    std::string producer;
    bool correct = false;
    NodeOrigin origin = NodeOrigin::Sampled;
    std::optional<Observation> observation;
    std::optional<Critique> critique;

    friend bool operator==(const ActionNode&, const ActionNode&) = default;
};

struct NodePair {
    std::string chosen;
    std::string rejected;

    friend bool operator==(const NodePair&, const NodePair&) = default;
};

struct PreferenceTree {
    Instruction instruction;
    std::map<std::string, ActionNode> nodes;
    int max_depth = kMaxTurns;
    // Chosen/rejected links for Additional nodes.
    std::vector<NodePair> extra_pairs;

    friend bool operator==(const PreferenceTree&, const PreferenceTree&) = default;

    const ActionNode& node(const std::string& id) const;
    // Child ids in id order.
    std::vector<std::string> children(const std::string& id) const;
    // Turn-1 node ids in id order.
    std::vector<std::string> roots() const;
    // Deepest turn present; 0 for an empty tree.
    int depth() const;
};

// Root-to-leaf sequence of node ids.
using Trajectory = std::vector<std::string>;

struct ContextTurn {
    std::string body;
    std::optional<Observation> observation;
    std::optional<Critique> critique;

    friend bool operator==(const ContextTurn&, const ContextTurn&) = default;
};

struct ActionPair {
    std::string instruction_id;
    std::vector<ContextTurn> context;
    std::string chosen;
    std::string rejected;
    int turn_chosen = 1;
    int turn_rejected = 1;
    PairOrigin origin = PairOrigin::MultiTurn;

    friend bool operator==(const ActionPair&, const ActionPair&) = default;
};

// Every broken invariant as "node <id>: <rule>" (or "tree: <rule>"). Empty when valid.
std::vector<std::string> validate_tree(const PreferenceTree& tree);

std::vector<std::string> validate_instruction(const Instruction& inst);

// Violations of the ActionPair invariants, resolved against the owning tree.
std::vector<std::string> validate_pair(const ActionPair& pair, const PreferenceTree& tree);

// All root-to-leaf paths, depth-first with children in id order.
// Throws ValidationError on an invalid tree.
std::vector<Trajectory> trajectories(const PreferenceTree& tree);

// Content-addressed id derived from (instruction id, turn, body).
std::string make_node_id(std::string_view instruction_id, int turn, std::string_view body);

// Path of node ids from the turn-1 ancestor down to id (inclusive).
std::vector<std::string> path_to(const PreferenceTree& tree, const std::string& id);

// Accumulates nodes for one tree. Assigns content-addressed ids and
// disambiguates the rare collision with a numeric suffix.
class TreeBuilder {
public:
    explicit TreeBuilder(Instruction instruction, int max_depth = kMaxTurns);

    // Sets node.id and inserts; returns the assigned id.
    const std::string& add(ActionNode node);
    void add_extra_pair(NodePair pair) { tree_.extra_pairs.push_back(std::move(pair)); }
    ActionNode& at(const std::string& id) { return tree_.nodes.at(id); }
    const PreferenceTree& peek() const { return tree_; }
    PreferenceTree build() &&;

private:
    PreferenceTree tree_;
};

}  // namespace preftree
