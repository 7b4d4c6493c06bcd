#include "mocks.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "preftree/hash.hpp"

namespace fixtures {

Instruction math_instruction(const std::string& id, const std::string& answer, std::optional<std::string> rationale,
                             bool tool_mode) {
    Instruction inst;
    inst.id = id;
    inst.dataset = "gsm8k";
    inst.task = Task::Math;
    inst.tool_mode = tool_mode;
    inst.prompt = "Problem " + id + ": what is the total?";
    inst.ground_truth.answer = answer;
    inst.ground_truth.rationale = rationale ? rationale : std::optional<std::string>("Add them up to get " + answer + ".");
    return inst;
}

Instruction coding_instruction(const std::string& id, std::vector<std::string> solutions, std::vector<TestCase> tests) {
    Instruction inst;
    inst.id = id;
    inst.dataset = "codecontest";
    inst.task = Task::Coding;
    inst.prompt = "Problem " + id + ": echo the input line.";
    inst.ground_truth.solutions = std::move(solutions);
    inst.ground_truth.test_cases = std::move(tests);
    return inst;
}

ClientPtr script_client(const std::string& model, Script script, PromptTemplates templates) {
    auto responder = [script = std::move(script), templates = std::move(templates)](
                         const std::vector<ChatMessage>& messages, const SamplingParams& params,
                         std::uint64_t ordinal) {
        PromptInfo info;
        info.kind = classify_prompt(messages, templates);
        info.turn = !messages.empty() && messages.front().role == "system"
                        ? static_cast<int>((messages.size() - 2) / 2) + 1
                        : 0;
        info.ordinal = ordinal;
        info.messages = &messages;
        std::vector<std::string> out;
        for (int k = 0; k < params.n; ++k) {
            info.index = k;
            out.push_back(script(info));
        }
        return out;
    };
    return std::make_shared<ScriptedClient>(model, responder);
}

ClientPtr scenario_client(const std::string& model, const Instruction& inst,
                          std::function<bool(const PromptInfo&)> correct) {
    return script_client(model, [inst, correct = std::move(correct)](const PromptInfo& p) -> std::string {
        switch (p.kind) {
            case PromptKind::Actor:
                return mock_action_body(inst, correct(p));
            case PromptKind::ElicitCoding:
            case PromptKind::ElicitMathText:
            case PromptKind::ElicitMathTool:
            case PromptKind::ElicitMathToolModular:
                return mock_action_body(inst, true);
            case PromptKind::RationaleToCode:
                return "```python\nprint(" + inst.ground_truth.answer.value_or("0") + ")\n```";
            case PromptKind::Critique:
                return "Step 2 is wrong; recheck the sum.";
            case PromptKind::Judge:
                return "VERDICT: CORRECT";
            case PromptKind::TestGen:
                return R"({"basic":["1","2","3","4"],"edge":["5","6","7","8"],"large":["9","10","11","12"]})";
            case PromptKind::Unknown:
                break;
        }
        return "unrecognized prompt";
    });
}

EngineConfig stub_engine(ClientPtr actor, ClientPtr critic) {
    EngineConfig ec;
    ec.actor = actor;
    ec.critic = critic ? critic : actor;
    ec.sandbox = make_toy_sandbox();
    return ec;
}

namespace {

const char* kWords[] = {"alpha", "beta", "gamma", "delta", "sum", "carry", "loop"};

std::string random_body(Rng& rng) {
    std::string s = "Step 1: ";
    const auto n = 1 + rng.uniform(3);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += kWords[rng.uniform(std::size(kWords))];
    }
    return s;
}

ActionNode random_node(Rng& rng, const std::optional<std::string>& parent, int turn, bool correct) {
    ActionNode n;
    n.parent_id = parent;
    n.turn = turn;
    n.body = random_body(rng);
    n.correct = correct;
    n.schema = rng.bernoulli(0.5) ? ReasoningSchema::ChainOfThought : ReasoningSchema::ModularProgramming;
    n.content_kind = static_cast<ContentKind>(rng.uniform(3));
    n.producer = "m" + std::to_string(rng.uniform(3));
    if (rng.bernoulli(0.3)) n.origin = NodeOrigin::GroundTruthElicited;
    if (rng.bernoulli(0.8)) {
        Observation o;
        if (rng.bernoulli(0.5)) o.exec_output = "out " + std::to_string(rng.uniform(100));
        if (rng.bernoulli(0.3)) o.traceback = "Traceback: ValueError";
        o.binary_feedback = correct;
        o.timed_out = rng.bernoulli(0.1);
        n.observation = o;
        if (!correct && rng.bernoulli(0.7)) n.critique = Critique{"fix step " + std::to_string(rng.uniform(4)), "critic"};
    }
    return n;
}

}  // namespace

PreferenceTree random_tree(Rng& rng, const std::string& id, const RandomTreeOptions& opts) {
    Instruction inst = math_instruction(id, std::to_string(rng.uniform(1000)));
    inst.task = static_cast<Task>(rng.uniform(3));
    inst.tool_mode = rng.bernoulli(0.5);
    const int max_depth = 1 + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(opts.max_turns)));
    TreeBuilder b(inst, max_depth);

    std::vector<std::pair<std::optional<std::string>, int>> frontier = {{std::nullopt, 1}};
    while (!frontier.empty()) {
        auto [parent, turn] = frontier.back();
        frontier.pop_back();
        const auto n_correct = rng.uniform(3);
        const auto n_incorrect = rng.uniform(3);
        for (std::uint64_t i = 0; i < n_correct; ++i) b.add(random_node(rng, parent, turn, true));
        for (std::uint64_t i = 0; i < n_incorrect; ++i) {
            const auto nid = b.add(random_node(rng, parent, turn, false));
            if (turn < max_depth && rng.bernoulli(opts.expand)) frontier.emplace_back(nid, turn + 1);
        }
    }
    if (b.peek().nodes.empty()) b.add(random_node(rng, std::nullopt, 1, true));

    if (opts.additional && rng.bernoulli(0.3)) {
        // Additional nodes hang under an existing incorrect parent (or the root).
        std::vector<std::pair<std::optional<std::string>, int>> slots = {{std::nullopt, 1}};
        for (const auto& [nid, n] : b.peek().nodes) {
            if (!n.correct && n.turn < max_depth) slots.emplace_back(nid, n.turn + 1);
        }
        const auto [parent, turn] = slots[rng.uniform(slots.size())];
        const auto count = 1 + rng.uniform(2);
        for (std::uint64_t i = 0; i < count; ++i) {
            auto c = random_node(rng, parent, turn, true);
            auto r = random_node(rng, parent, turn, false);
            c.origin = NodeOrigin::Additional;
            r.origin = NodeOrigin::Additional;
            r.critique.reset();
            const auto cid = b.add(std::move(c));
            const auto rid = b.add(std::move(r));
            b.add_extra_pair({cid, rid});
        }
    }
    return std::move(b).build();
}

std::vector<ActionPair> augment_reference(const PreferenceTree& tree, const AugmentConfig& cfg) {
    using Key = std::tuple<int, std::string>;
    std::vector<Key> good, bad;
    for (const auto& [id, n] : tree.nodes) {
        if (n.origin == NodeOrigin::Additional) continue;
        (n.correct ? good : bad).emplace_back(n.turn, id);
    }
    std::sort(good.begin(), good.end());
    std::sort(bad.begin(), bad.end());
    if (good.size() * bad.size() > cfg.product_cap) return {};

    std::vector<std::pair<Key, Key>> candidates;
    for (const auto& g : good) {
        for (const auto& r : bad) {
            if (std::get<0>(g) != std::get<0>(r)) candidates.emplace_back(g, r);
        }
    }
    std::vector<bool> taken(candidates.size(), false);
    std::size_t remaining = candidates.size();

    Rng rng(derive_seed(cfg.seed, tree.instruction.id));
    std::vector<ActionPair> out;
    auto count_uses = [&](const std::string& id) {
        std::size_t k = 0;
        for (const auto& p : out) k += (p.chosen == id) + (p.rejected == id);
        return k;
    };
    for (std::size_t draw = 0; draw < 10 * cfg.max_pairs && out.size() < cfg.max_pairs && remaining > 0; ++draw) {
        auto pick = rng.uniform(remaining);
        std::size_t slot = 0;
        for (;; ++slot) {
            if (taken[slot]) continue;
            if (pick == 0) break;
            --pick;
        }
        taken[slot] = true;
        --remaining;
        const auto& [g, r] = candidates[slot];
        const auto& gid = std::get<1>(g);
        const auto& rid = std::get<1>(r);
        if (count_uses(gid) >= cfg.max_occurrence || count_uses(rid) >= cfg.max_occurrence) continue;
        ActionPair p;
        p.instruction_id = tree.instruction.id;
        p.chosen = gid;
        p.rejected = rid;
        p.turn_chosen = std::get<0>(g);
        p.turn_rejected = std::get<0>(r);
        p.origin = PairOrigin::Augmented;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace fixtures
