#include "preftree/builder.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "preftree/hash.hpp"

namespace preftree {

BuildResult build_tree(const Instruction& inst, const Engine& engine, const Sampler& sampler, Rng& rng) {
    const auto& cfg = engine.config();
    BuildResult result;
    TreeBuilder builder(inst, cfg.max_depth);
    std::vector<ActionNode> history;
    bool extras_done = false;

    for (int turn = 1; turn <= cfg.max_depth; ++turn) {
        auto correct = sampler.sample_correct(inst, history, rng);
        auto incorrect = sampler.sample_incorrect(inst, history, rng);
        correct.report.incorrect_found = incorrect.has_value();
        result.audit.push_back(correct.report);

        if (correct.action) builder.add(std::move(correct.action->node));

        if (correct.reached_elicitation && !extras_done && inst.ground_truth.solutions.size() >= 2) {
            extras_done = true;
            for (auto& [c, r] : sampler.extra_pairs_for_hard(inst, history, rng)) {
                const auto chosen = builder.add(std::move(c.node));
                const auto rejected = builder.add(std::move(r.node));
                builder.add_extra_pair({chosen, rejected});
            }
        }

        if (!incorrect) {
            if (!correct.action) result.warnings.push_back("turn " + std::to_string(turn) + ": no action found");
            break;
        }
        if (!correct.action) {
            result.warnings.push_back("turn " + std::to_string(turn) + ": no correct action after the full ladder");
        }

        const auto id = builder.add(std::move(incorrect->node));
        if (turn == cfg.max_depth) break;

        auto& node = builder.at(id);
        node.critique = engine.critique(node, *node.observation, inst, history, *cfg.critic);
        history.push_back(node);
    }

    result.tree = std::move(builder).build();
    return result;
}

std::vector<BatchItem> build_batch(const std::vector<Instruction>& instructions, const Engine& engine,
                                   const Sampler& sampler, std::uint64_t seed, std::size_t jobs) {
    std::vector<BatchItem> items(instructions.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < instructions.size(); i = next++) {
            const auto& inst = instructions[i];
            items[i].instruction_id = inst.id;
            try {
                Rng rng(derive_seed(seed, inst.id));
                items[i].result = build_tree(inst, engine, sampler, rng);
            } catch (const std::exception& e) {
                items[i].error = e.what();
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(instructions.size(), 1));
    if (jobs == 1) {
        work();
        return items;
    }
    std::vector<std::thread> workers;
    for (std::size_t j = 0; j < jobs; ++j) workers.emplace_back(work);
    for (auto& w : workers) w.join();
    return items;
}

}  // namespace preftree
