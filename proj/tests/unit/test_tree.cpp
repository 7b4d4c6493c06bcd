#include <algorithm>
#include <functional>
#include <set>

#include "doctest.h"
#include "mocks.hpp"
#include "preftree/errors.hpp"

using namespace preftree;

namespace {

ActionNode node(const std::string& id, std::optional<std::string> parent, int turn, bool correct) {
    ActionNode n;
    n.id = id;
    n.parent_id = std::move(parent);
    n.turn = turn;
    n.body = "body " + id;
    n.correct = correct;
    return n;
}

PreferenceTree make(std::vector<ActionNode> nodes) {
    PreferenceTree t;
    t.instruction = fixtures::math_instruction("q", "1");
    for (auto& n : nodes) t.nodes[n.id] = n;
    return t;
}

bool has(const std::vector<std::string>& v, const std::string& needle) {
    return std::any_of(v.begin(), v.end(), [&](const auto& s) { return s.find(needle) != std::string::npos; });
}

// Independent statement of the structural rules.
bool brute_force_valid(const PreferenceTree& t) {
    if (t.instruction.id.empty() || t.instruction.prompt.empty()) return false;
    if (t.max_depth < 1 || t.max_depth > 5) return false;
    for (const auto& [key, n] : t.nodes) {
        if (key != n.id) return false;
        if (n.turn < 1 || n.turn > t.max_depth) return false;
        if (n.critique && !n.observation) return false;
        if (n.turn == 1) {
            if (n.parent_id) return false;
            continue;
        }
        if (!n.parent_id) return false;
        auto p = t.nodes.find(*n.parent_id);
        if (p == t.nodes.end() || p->second.correct || p->second.turn + 1 != n.turn) return false;
    }
    // Walk up from every node; a turn-1 ancestor must be reached.
    for (const auto& [key, n] : t.nodes) {
        const ActionNode* cur = &n;
        int steps = 0;
        while (cur->parent_id && steps++ < 10) cur = &t.nodes.at(*cur->parent_id);
        if (cur->parent_id || cur->turn != 1) return false;
    }
    for (const auto& p : t.extra_pairs) {
        auto c = t.nodes.find(p.chosen);
        auto r = t.nodes.find(p.rejected);
        if (c == t.nodes.end() || r == t.nodes.end()) return false;
        if (!c->second.correct || r->second.correct) return false;
    }
    return true;
}

void mutate(PreferenceTree& t, Rng& rng) {
    std::vector<std::string> ids;
    for (const auto& [id, _] : t.nodes) ids.push_back(id);
    auto& n = t.nodes.at(ids[rng.uniform(ids.size())]);
    switch (rng.uniform(11)) {
        case 0: n.turn = 6; break;
        case 1: n.turn += 1; break;
        case 2:
            if (n.parent_id && t.nodes.count(*n.parent_id)) t.nodes.at(*n.parent_id).correct = true;
            break;
        case 3: n.parent_id = "missing"; break;
        case 4: n.parent_id = ids[rng.uniform(ids.size())]; break;
        case 5: n.id = "renamed"; break;
        case 6:
            n.critique = Critique{"c", "a"};
            n.observation.reset();
            break;
        case 7: t.max_depth = static_cast<int>(rng.uniform(8)); break;
        case 8: t.extra_pairs.push_back({ids[rng.uniform(ids.size())], ids[rng.uniform(ids.size())]}); break;
        case 9: n.correct = !n.correct; break;
        default: break;
    }
}

}  // namespace

TEST_CASE("minimal legal tree") { CHECK(validate_tree(make({node("c1", {}, 1, true)})).empty()); }

TEST_CASE("correct node with a child is rejected") {
    auto v = validate_tree(make({node("c1", {}, 1, true), node("x", "c1", 2, false)}));
    CHECK(has(v, "correct node has child"));
}

TEST_CASE("chain of six turns exceeds depth 5") {
    std::vector<ActionNode> nodes;
    for (int t = 1; t <= 6; ++t) {
        nodes.push_back(node("i" + std::to_string(t), t == 1 ? std::nullopt : std::optional("i" + std::to_string(t - 1)),
                             t, false));
    }
    auto tree = make(nodes);
    CHECK(has(validate_tree(tree), "depth exceeds 5"));
    CHECK_THROWS_AS(trajectories(tree), ValidationError);
}

TEST_CASE("per-tree max_depth is enforced") {
    auto tree = make({node("i1", {}, 1, false), node("c2", "i1", 2, true)});
    tree.max_depth = 1;
    CHECK(has(validate_tree(tree), "depth exceeds max_depth 1"));
}

TEST_CASE("missing parent, turn skips and unreachable nodes are named") {
    auto v = validate_tree(make({node("i1", {}, 1, false), node("c3", "i1", 3, true), node("o", "ghost", 2, false)}));
    CHECK(has(v, "node c3: turn is not parent turn + 1"));
    CHECK(has(v, "node o: parent missing"));
    CHECK(has(v, "node o: unreachable"));
}

TEST_CASE("trajectories of a two-turn tree") {
    auto tree = make({node("c1", {}, 1, true), node("i1", {}, 1, false), node("c2", "i1", 2, true),
                      node("i2", "i1", 2, false)});
    const auto paths = trajectories(tree);
    REQUIRE(paths.size() == 3);
    CHECK(paths[0] == Trajectory{"c1"});
    CHECK(paths[1] == Trajectory{"i1", "c2"});
    CHECK(paths[2] == Trajectory{"i1", "i2"});
}

TEST_CASE("path count equals leaf count on random trees") {
    Rng rng(1);
    for (int k = 0; k < 300; ++k) {
        const auto tree = fixtures::random_tree(rng, "t" + std::to_string(k));
        std::size_t leaves = 0;
        for (const auto& [id, _] : tree.nodes) leaves += tree.children(id).empty() ? 1 : 0;
        const auto paths = trajectories(tree);
        CHECK(paths.size() == leaves);
        std::set<Trajectory> uniq(paths.begin(), paths.end());
        CHECK(uniq.size() == paths.size());
        for (const auto& p : paths) {
            CHECK(p.size() <= 5);
            for (std::size_t i = 1; i < p.size(); ++i) CHECK(*tree.node(p[i]).parent_id == p[i - 1]);
        }
    }
}

TEST_CASE("validate_tree agrees with the brute-force checker") {
    Rng rng(2024);
    int valid = 0, invalid = 0;
    for (int k = 0; k < 2000; ++k) {
        auto tree = fixtures::random_tree(rng, "v" + std::to_string(k));
        REQUIRE(brute_force_valid(tree));
        REQUIRE(validate_tree(tree).empty());
        const auto rounds = rng.uniform(3);
        for (std::uint64_t r = 0; r < rounds; ++r) mutate(tree, rng);
        const bool expected = brute_force_valid(tree);
        CHECK(validate_tree(tree).empty() == expected);
        (expected ? valid : invalid)++;
    }
    CHECK(valid > 100);
    CHECK(invalid > 100);
}

TEST_CASE("content-addressed ids are stable and collisions get suffixes") {
    CHECK(make_node_id("q", 1, "x") == make_node_id("q", 1, "x"));
    CHECK(make_node_id("q", 1, "x") != make_node_id("q", 2, "x"));
    TreeBuilder b(fixtures::math_instruction("q", "1"));
    ActionNode n;
    n.body = "same";
    n.correct = true;
    const auto a = b.add(n);
    const auto c = b.add(n);
    CHECK(a != c);
    CHECK(c == a + "-2");
}

TEST_CASE("enum names round-trip") {
    for (auto t : {Task::Math, Task::Coding, Task::Logic}) CHECK(parse_task(to_string(t)) == t);
    for (auto o : {NodeOrigin::Sampled, NodeOrigin::GroundTruthElicited, NodeOrigin::Additional}) {
        CHECK(parse_node_origin(to_string(o)) == o);
    }
    CHECK_THROWS_AS(parse_task("Poetry"), std::invalid_argument);
}

TEST_CASE("validate_pair flags rule breaks") {
    auto tree = make({node("c1", {}, 1, true), node("i1", {}, 1, false), node("c2", "i1", 2, true)});
    ActionPair p{"q", {}, "c2", "i1", 2, 1, PairOrigin::Augmented};
    CHECK(validate_pair(p, tree).empty());
    p.origin = PairOrigin::MultiTurn;
    CHECK(has(validate_pair(p, tree), "multi-turn pair across turns"));
    ActionPair same{"q", {}, "c1", "i1", 1, 1, PairOrigin::Augmented};
    CHECK(has(validate_pair(same, tree), "augmented pair within one turn"));
    ActionPair swapped{"q", {}, "i1", "c1", 1, 1, PairOrigin::MultiTurn};
    CHECK(has(validate_pair(swapped, tree), "chosen node is incorrect"));
}
