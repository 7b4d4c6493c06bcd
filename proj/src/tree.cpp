#include "preftree/tree.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <set>
#include <stdexcept>

#include "preftree/errors.hpp"
#include "preftree/hash.hpp"

namespace preftree {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table, const char* what) {
    for (const auto& [value, name] : table) {
        if (name == s) return value;
    }
    throw std::invalid_argument(std::string("unknown ") + what + ": " + std::string(s));
}

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::array<std::pair<E, std::string_view>, N>& table) {
    for (const auto& [value, name] : table) {
        if (value == v) return name;
    }
    return "?";
}

constexpr std::array<std::pair<Task, std::string_view>, 3> kTasks{{
    {Task::Math, "Math"}, {Task::Coding, "Coding"}, {Task::Logic, "Logic"}}};
constexpr std::array<std::pair<TestCategory, std::string_view>, 4> kCategories{{
    {TestCategory::Basic, "Basic"}, {TestCategory::Edge, "Edge"},
    {TestCategory::Large, "Large"}, {TestCategory::Given, "Given"}}};
constexpr std::array<std::pair<ReasoningSchema, std::string_view>, 2> kSchemas{{
    {ReasoningSchema::ChainOfThought, "ChainOfThought"},
    {ReasoningSchema::ModularProgramming, "ModularProgramming"}}};
constexpr std::array<std::pair<ContentKind, std::string_view>, 3> kKinds{{
    {ContentKind::Text, "Text"}, {ContentKind::Code, "Code"}, {ContentKind::Mixed, "Mixed"}}};
constexpr std::array<std::pair<NodeOrigin, std::string_view>, 3> kNodeOrigins{{
    {NodeOrigin::Sampled, "Sampled"},
    {NodeOrigin::GroundTruthElicited, "GroundTruthElicited"},
    {NodeOrigin::Additional, "Additional"}}};
constexpr std::array<std::pair<PairOrigin, std::string_view>, 3> kPairOrigins{{
    {PairOrigin::MultiTurn, "MultiTurn"},
    {PairOrigin::Augmented, "Augmented"},
    {PairOrigin::Additional, "Additional"}}};

}  // namespace

std::string_view to_string(Task t) { return name_of(t, kTasks); }
std::string_view to_string(TestCategory c) { return name_of(c, kCategories); }
std::string_view to_string(ReasoningSchema s) { return name_of(s, kSchemas); }
std::string_view to_string(ContentKind k) { return name_of(k, kKinds); }
std::string_view to_string(NodeOrigin o) { return name_of(o, kNodeOrigins); }
std::string_view to_string(PairOrigin o) { return name_of(o, kPairOrigins); }

Task parse_task(std::string_view s) { return parse_enum(s, kTasks, "task"); }
TestCategory parse_test_category(std::string_view s) { return parse_enum(s, kCategories, "test category"); }
ReasoningSchema parse_schema(std::string_view s) { return parse_enum(s, kSchemas, "schema"); }
ContentKind parse_content_kind(std::string_view s) { return parse_enum(s, kKinds, "content kind"); }
NodeOrigin parse_node_origin(std::string_view s) { return parse_enum(s, kNodeOrigins, "node origin"); }
PairOrigin parse_pair_origin(std::string_view s) { return parse_enum(s, kPairOrigins, "pair origin"); }

bool requires_judge(const Instruction& inst) {
    if (inst.task == Task::Coding) return inst.ground_truth.test_cases.empty();
    return !inst.ground_truth.answer.has_value();
}

const ActionNode& PreferenceTree::node(const std::string& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw std::out_of_range("no node " + id);
    return it->second;
}

std::vector<std::string> PreferenceTree::children(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [nid, n] : nodes) {
        if (n.parent_id && *n.parent_id == id) out.push_back(nid);
    }
    return out;
}

std::vector<std::string> PreferenceTree::roots() const {
    std::vector<std::string> out;
    for (const auto& [nid, n] : nodes) {
        if (!n.parent_id) out.push_back(nid);
    }
    return out;
}

int PreferenceTree::depth() const {
    int d = 0;
    for (const auto& [_, n] : nodes) d = std::max(d, n.turn);
    return d;
}

std::vector<std::string> validate_instruction(const Instruction& inst) {
    std::vector<std::string> v;
    if (inst.id.empty()) v.emplace_back("instruction: empty id");
    if (inst.prompt.empty()) v.emplace_back("instruction " + inst.id + ": empty prompt");
    return v;
}

std::vector<std::string> validate_tree(const PreferenceTree& tree) {
    std::vector<std::string> v;
    for (auto& m : validate_instruction(tree.instruction)) v.push_back("tree: " + m);
    if (tree.max_depth < 1 || tree.max_depth > kMaxTurns) {
        v.push_back("tree: max_depth " + std::to_string(tree.max_depth) + " outside [1,5]");
    }
    const int cap = std::clamp(tree.max_depth, 1, kMaxTurns);

    std::map<std::string, int> child_count;
    for (const auto& [id, n] : tree.nodes) {
        if (n.parent_id) ++child_count[*n.parent_id];
    }

    for (const auto& [id, n] : tree.nodes) {
        const std::string where = "node " + id + ": ";
        if (n.id != id) v.push_back(where + "id does not match key");
        if (n.turn < 1) v.push_back(where + "turn out of range");
        if (n.turn > kMaxTurns) {
            v.push_back(where + "depth exceeds 5");
        } else if (n.turn > cap) {
            v.push_back(where + "depth exceeds max_depth " + std::to_string(cap));
        }
        if (n.parent_id.has_value() != (n.turn != 1)) {
            v.push_back(where + (n.parent_id ? "turn-1 node has a parent" : "non-root node lacks a parent"));
        }
        if (n.parent_id) {
            auto p = tree.nodes.find(*n.parent_id);
            if (p == tree.nodes.end()) {
                v.push_back(where + "parent missing");
            } else {
                if (p->second.correct) v.push_back("node " + p->first + ": correct node has child");
                if (n.turn != p->second.turn + 1) v.push_back(where + "turn is not parent turn + 1");
            }
        }
        if (n.critique && !n.observation) v.push_back(where + "critique without observation");
    }

    // Reachability from turn-1 nodes; also rules out cycles through parent links.
    std::set<std::string> seen;
    std::vector<std::string> stack = tree.roots();
    while (!stack.empty()) {
        auto id = stack.back();
        stack.pop_back();
        if (!seen.insert(id).second) continue;
        for (auto& c : tree.children(id)) stack.push_back(c);
    }
    for (const auto& [id, _] : tree.nodes) {
        if (!seen.count(id)) v.push_back("node " + id + ": unreachable from a turn-1 node");
    }

    for (const auto& p : tree.extra_pairs) {
        auto c = tree.nodes.find(p.chosen);
        auto r = tree.nodes.find(p.rejected);
        if (c == tree.nodes.end() || r == tree.nodes.end()) {
            v.push_back("tree: extra pair references missing node");
            continue;
        }
        if (!c->second.correct) v.push_back("tree: extra pair chosen node " + p.chosen + " is incorrect");
        if (r->second.correct) v.push_back("tree: extra pair rejected node " + p.rejected + " is correct");
    }
    // Deduplicate "correct node has child" reported once per child.
    std::vector<std::string> out;
    std::set<std::string> uniq;
    for (auto& m : v) {
        if (uniq.insert(m).second) out.push_back(std::move(m));
    }
    return out;
}

std::vector<std::string> validate_pair(const ActionPair& pair, const PreferenceTree& tree) {
    std::vector<std::string> v;
    auto c = tree.nodes.find(pair.chosen);
    auto r = tree.nodes.find(pair.rejected);
    if (c == tree.nodes.end() || r == tree.nodes.end()) {
        v.emplace_back("pair references missing node");
        return v;
    }
    if (!c->second.correct) v.emplace_back("chosen node is incorrect");
    if (r->second.correct) v.emplace_back("rejected node is correct");
    if (c->second.turn != pair.turn_chosen || r->second.turn != pair.turn_rejected) {
        v.emplace_back("pair turns disagree with nodes");
    }
    if (pair.origin == PairOrigin::MultiTurn) {
        if (pair.turn_chosen != pair.turn_rejected) v.emplace_back("multi-turn pair across turns");
        if (c->second.parent_id != r->second.parent_id) v.emplace_back("multi-turn pair with different contexts");
    }
    if (pair.origin == PairOrigin::Augmented && pair.turn_chosen == pair.turn_rejected) {
        v.emplace_back("augmented pair within one turn");
    }
    return v;
}

std::vector<Trajectory> trajectories(const PreferenceTree& tree) {
    auto violations = validate_tree(tree);
    if (!violations.empty()) throw ValidationError(std::move(violations));

    std::vector<Trajectory> out;
    Trajectory path;
    std::function<void(const std::string&)> walk = [&](const std::string& id) {
        path.push_back(id);
        auto kids = tree.children(id);
        if (kids.empty()) {
            out.push_back(path);
        } else {
            for (const auto& k : kids) walk(k);
        }
        path.pop_back();
    };
    for (const auto& r : tree.roots()) walk(r);
    return out;
}

std::vector<std::string> path_to(const PreferenceTree& tree, const std::string& id) {
    std::vector<std::string> path;
    std::optional<std::string> cur = id;
    while (cur) {
        const auto& n = tree.node(*cur);
        path.push_back(*cur);
        if (path.size() > static_cast<std::size_t>(kMaxTurns) + 1) throw std::runtime_error("cycle at " + id);
        cur = n.parent_id;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::string make_node_id(std::string_view instruction_id, int turn, std::string_view body) {
    std::string key;
    key.reserve(instruction_id.size() + body.size() + 8);
    key.append(instruction_id);
    key.push_back('\x1f');
    key.append(std::to_string(turn));
    key.push_back('\x1f');
    key.append(body);
    return "n" + to_hex(hash64(key));
}

TreeBuilder::TreeBuilder(Instruction instruction, int max_depth) {
    tree_.instruction = std::move(instruction);
    tree_.max_depth = max_depth;
}

const std::string& TreeBuilder::add(ActionNode node) {
    std::string id = make_node_id(tree_.instruction.id, node.turn, node.body);
    if (tree_.nodes.count(id)) {
        int k = 2;
        while (tree_.nodes.count(id + "-" + std::to_string(k))) ++k;
        id += "-" + std::to_string(k);
    }
    node.id = id;
    auto [it, _] = tree_.nodes.emplace(id, std::move(node));
    return it->first;
}

PreferenceTree TreeBuilder::build() && { return std::move(tree_); }

}  // namespace preftree
