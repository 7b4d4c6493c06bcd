#include "preftree/pairs.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "preftree/engine.hpp"
#include "preftree/hash.hpp"
#include "preftree/rng.hpp"

namespace preftree {

using nlohmann::json;

namespace {

std::vector<ContextTurn> context_before(const PreferenceTree& tree, const ActionNode& node) {
    std::vector<ContextTurn> ctx;
    if (!node.parent_id) return ctx;
    for (const auto& id : path_to(tree, *node.parent_id)) {
        const auto& n = tree.node(id);
        ctx.push_back({n.body, n.observation, n.critique});
    }
    return ctx;
}

std::vector<std::string> chain_nodes(const PreferenceTree& tree, bool correct) {
    std::vector<const ActionNode*> picked;
    for (const auto& [_, n] : tree.nodes) {
        if (n.origin != NodeOrigin::Additional && n.correct == correct) picked.push_back(&n);
    }
    std::stable_sort(picked.begin(), picked.end(), [](auto* a, auto* b) { return a->turn < b->turn; });
    std::vector<std::string> out;
    for (auto* n : picked) out.push_back(n->id);
    return out;
}

ActionPair make_pair(const PreferenceTree& tree, const ActionNode& c, const ActionNode& r, PairOrigin origin,
                     std::vector<ContextTurn> context) {
    ActionPair p;
    p.instruction_id = tree.instruction.id;
    p.context = std::move(context);
    p.chosen = c.id;
    p.rejected = r.id;
    p.turn_chosen = c.turn;
    p.turn_rejected = r.turn;
    p.origin = origin;
    return p;
}

}  // namespace

std::vector<std::string> chain_correct(const PreferenceTree& tree) { return chain_nodes(tree, true); }
std::vector<std::string> chain_incorrect(const PreferenceTree& tree) { return chain_nodes(tree, false); }

std::vector<ActionPair> multiturn_pairs(const PreferenceTree& tree) {
    // Sibling groups keyed by parent; "" stands for the instruction root.
    std::map<std::string, std::pair<const ActionNode*, const ActionNode*>> groups;
    for (const auto& [id, n] : tree.nodes) {
        if (n.origin == NodeOrigin::Additional) continue;
        auto& g = groups[n.parent_id.value_or("")];
        auto& slot = n.correct ? g.first : g.second;
        if (!slot) slot = &n;
    }
    std::vector<ActionPair> out;
    for (const auto& [_, g] : groups) {
        if (g.first && g.second) {
            out.push_back(make_pair(tree, *g.first, *g.second, PairOrigin::MultiTurn, context_before(tree, *g.first)));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.turn_chosen < b.turn_chosen; });
    return out;
}

std::vector<ActionPair> augment_pairs(const PreferenceTree& tree, const AugmentConfig& cfg) {
    const auto correct = chain_correct(tree);
    const auto incorrect = chain_incorrect(tree);
    std::vector<ActionPair> out;
    if (correct.size() * incorrect.size() > cfg.product_cap) return out;

    std::vector<std::pair<const ActionNode*, const ActionNode*>> pool;
    for (const auto& c : correct) {
        for (const auto& r : incorrect) {
            const auto& cn = tree.node(c);
            const auto& rn = tree.node(r);
            if (cn.turn != rn.turn) pool.emplace_back(&cn, &rn);
        }
    }

    Rng rng(derive_seed(cfg.seed, tree.instruction.id));
    std::map<std::string, std::size_t> uses;
    const std::size_t draw_limit = 10 * cfg.max_pairs;
    for (std::size_t draws = 0; out.size() < cfg.max_pairs && !pool.empty() && draws < draw_limit; ++draws) {
        const auto k = static_cast<std::size_t>(rng.uniform(pool.size()));
        const auto [c, r] = pool[k];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
        if (uses[c->id] >= cfg.max_occurrence || uses[r->id] >= cfg.max_occurrence) continue;
        ++uses[c->id];
        ++uses[r->id];
        out.push_back(make_pair(tree, *c, *r, PairOrigin::Augmented, {}));
    }
    return out;
}

std::vector<ActionPair> additional_pairs(const PreferenceTree& tree) {
    std::vector<ActionPair> out;
    for (const auto& p : tree.extra_pairs) {
        const auto& c = tree.node(p.chosen);
        out.push_back(make_pair(tree, c, tree.node(p.rejected), PairOrigin::Additional, context_before(tree, c)));
    }
    return out;
}

std::vector<SftRecord> export_sft(const std::vector<PreferenceTree>& trees, SftMode mode) {
    std::vector<SftRecord> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& tree : trees) {
        std::vector<const ActionNode*> nodes;
        for (const auto& [_, n] : tree.nodes) {
            if (!n.correct) continue;
            if (mode == SftMode::LeafOnly && n.origin == NodeOrigin::Additional) continue;
            nodes.push_back(&n);
        }
        std::stable_sort(nodes.begin(), nodes.end(), [](auto* a, auto* b) { return a->turn < b->turn; });
        for (const auto* n : nodes) {
            if (!seen.emplace(tree.instruction.prompt, n->body).second) continue;
            out.push_back({tree.instruction.prompt, n->body, tree.instruction.id, n->id, n->turn});
        }
    }
    return out;
}

std::vector<ChatMessage> render_context(const Instruction& inst, const std::vector<ContextTurn>& context) {
    std::vector<ChatMessage> msgs{{"user", inst.prompt}};
    for (const auto& turn : context) {
        msgs.push_back({"assistant", turn.body});
        std::string feedback;
        if (turn.observation) feedback += "Observation:\n" + Engine::render_observation(*turn.observation);
        if (turn.critique) {
            if (!feedback.empty()) feedback += "\n\n";
            feedback += "Feedback:\n" + turn.critique->text;
        }
        msgs.push_back({"user", feedback});
    }
    return msgs;
}

std::vector<PairRecord> export_preference(const std::vector<PreferenceTree>& trees, const AugmentConfig& cfg) {
    std::vector<PairRecord> out;
    for (const auto& tree : trees) {
        if (requires_judge(tree.instruction)) continue;
        auto pairs = multiturn_pairs(tree);
        for (auto& p : augment_pairs(tree, cfg)) pairs.push_back(std::move(p));
        for (auto& p : additional_pairs(tree)) pairs.push_back(std::move(p));
        for (auto& p : pairs) {
            PairRecord r;
            r.context = render_context(tree.instruction, p.context);
            r.chosen = tree.node(p.chosen).body;
            r.rejected = tree.node(p.rejected).body;
            r.pair = std::move(p);
            out.push_back(std::move(r));
        }
    }
    return out;
}

json to_json(const SftRecord& r) {
    return json{{"prompt", r.prompt},
                {"response", r.response},
                {"meta", {{"instruction_id", r.instruction_id}, {"node_id", r.node_id}, {"turn", r.turn}}}};
}

json to_json(const PairRecord& r) {
    json ctx = json::array();
    for (const auto& m : r.context) ctx.push_back({{"role", m.role}, {"content", m.content}});
    return json{{"context", ctx},
                {"chosen", r.chosen},
                {"rejected", r.rejected},
                {"origin", std::string(to_string(r.pair.origin))},
                {"meta",
                 {{"instruction_id", r.pair.instruction_id},
                  {"chosen_id", r.pair.chosen},
                  {"rejected_id", r.pair.rejected},
                  {"turn_chosen", r.pair.turn_chosen},
                  {"turn_rejected", r.pair.turn_rejected}}}};
}

}  // namespace preftree
