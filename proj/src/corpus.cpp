#include "preftree/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "preftree/decontam.hpp"
#include "preftree/hash.hpp"
#include "preftree/tree_io.hpp"

namespace preftree {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownFields = {"id",     "dataset", "task",      "tool_mode", "prompt",    "ground_truth",
                                            "metadata", "answer", "rationale", "solutions", "test_cases"};

json as_text(const json& v) { return v.is_string() || v.is_null() ? v : json(v.dump()); }

bool dataset_is(const Instruction& inst, std::string_view name) { return to_lower(inst.dataset) == name; }

std::optional<long> metadata_int(const Instruction& inst, const std::string& key) {
    auto it = inst.metadata.find(key);
    if (it == inst.metadata.end()) return std::nullopt;
    std::string digits;
    for (char c : it->second) {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            digits.push_back(c);
        } else if (!digits.empty()) {
            break;
        }
    }
    if (digits.empty() || digits.size() > 9) return std::nullopt;
    return std::stol(digits);
}

}  // namespace

IngestResult ingest(std::istream& in, const IngestOptions& opts) {
    IngestResult result;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
            if (!j.contains("id") || j["id"].is_null()) throw std::invalid_argument("missing id");
            if (!j.contains("prompt") || !j["prompt"].is_string() || j["prompt"].get<std::string>().empty()) {
                throw std::invalid_argument("missing prompt");
            }

            json norm = json::object();
            norm["id"] = j["id"].is_string() ? j["id"] : json(j["id"].dump());
            norm["prompt"] = j["prompt"];
            norm["dataset"] = j.contains("dataset") ? j["dataset"] : json(opts.dataset.value_or(""));
            if (j.contains("task")) {
                norm["task"] = j["task"];
            } else if (opts.task) {
                norm["task"] = std::string(to_string(*opts.task));
            } else {
                throw std::invalid_argument("missing task");
            }
            norm["tool_mode"] = j.contains("tool_mode") ? j["tool_mode"] : json(opts.tool_mode.value_or(false));

            json gt = j.contains("ground_truth") && j["ground_truth"].is_object() ? j["ground_truth"] : json::object();
            for (const char* key : {"answer", "rationale", "solutions", "test_cases"}) {
                if (j.contains(key)) gt[key] = j[key];
            }
            for (const char* key : {"answer", "rationale"}) {
                if (gt.contains(key)) gt[key] = as_text(gt[key]);
            }
            norm["ground_truth"] = gt;

            json meta = j.contains("metadata") && j["metadata"].is_object() ? j["metadata"] : json::object();
            for (const auto& [k, v] : j.items()) {
                if (!kKnownFields.count(k)) meta[k] = v;
            }
            norm["metadata"] = meta;

            auto inst = instruction_from_json(norm);
            if (!seen.insert(inst.id).second) throw std::invalid_argument("duplicate id " + inst.id);
            result.instructions.push_back(std::move(inst));
        } catch (const std::exception& e) {
            result.errors.push_back({lineno, e.what()});
        }
    }
    return result;
}

std::vector<Instruction> select_mathqa(const std::vector<Instruction>& instructions, std::uint64_t seed,
                                       std::size_t per_pattern) {
    std::map<std::string, std::size_t> category_freq;
    std::map<std::string, std::vector<std::size_t>> by_pattern;
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        const auto& inst = instructions[i];
        if (!dataset_is(inst, "mathqa")) continue;
        auto cat = inst.metadata.find("category");
        ++category_freq[cat == inst.metadata.end() ? "" : cat->second];
        auto pat = inst.metadata.find("formula_pattern");
        // Records without a pattern each form their own group.
        by_pattern[pat == inst.metadata.end() ? "\x1f" + inst.id : pat->second].push_back(i);
    }

    std::vector<bool> keep(instructions.size(), true);
    for (auto& [pattern, members] : by_pattern) {
        if (members.size() <= per_pattern) continue;
        Rng rng(derive_seed(seed, pattern));
        for (std::size_t k = members.size(); k > 1; --k) {
            std::swap(members[k - 1], members[rng.uniform(k)]);
        }
        auto freq = [&](std::size_t i) {
            auto cat = instructions[i].metadata.find("category");
            return category_freq[cat == instructions[i].metadata.end() ? "" : cat->second];
        };
        std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return freq(a) < freq(b); });
        for (std::size_t k = per_pattern; k < members.size(); ++k) keep[members[k]] = false;
    }

    std::vector<Instruction> out;
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        if (keep[i]) out.push_back(instructions[i]);
    }
    return out;
}

std::vector<Instruction> filter_numglue(const std::vector<Instruction>& instructions) {
    std::vector<Instruction> out;
    for (const auto& inst : instructions) {
        if (dataset_is(inst, "numglue")) {
            auto task = metadata_int(inst, "task_id");
            if (task && *task >= 5 && *task <= 7) continue;
        }
        out.push_back(inst);
    }
    return out;
}

FilterOutcome filter_tabmwp(const std::vector<Instruction>& instructions) {
    FilterOutcome out;
    for (const auto& inst : instructions) {
        if (dataset_is(inst, "tabmwp")) {
            auto level = metadata_int(inst, "difficulty");
            if (!level) {
                out.warnings.push_back("instruction " + inst.id + ": no readable difficulty, dropped");
                continue;
            }
            if (*level != 4 && *level != 5) continue;
        }
        out.kept.push_back(inst);
    }
    return out;
}

std::vector<Instruction> filter_by_probe_failure(const std::vector<Instruction>& instructions, const Engine& engine,
                                                 ModelClient& probe, int k, std::uint64_t seed, std::size_t jobs) {
    std::vector<char> failed(instructions.size(), 0);
    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr error;
    auto work = [&] {
        for (std::size_t i = next++; i < instructions.size(); i = next++) {
            const auto& inst = instructions[i];
            try {
                Rng rng(derive_seed(seed, inst.id));
                bool solved = false;
                for (int a = 0; a < k && !solved; ++a) {
                    auto action = engine.run_action(inst, {}, probe, sample_schema(rng));
                    solved = engine.evaluate(action, inst).correct;
                }
                failed[i] = solved ? 0 : 1;
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(instructions.size(), 1));
    if (jobs == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    std::vector<Instruction> out;
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        if (failed[i]) out.push_back(instructions[i]);
    }
    return out;
}

std::size_t count_word_tokens(std::string_view text) { return tokenize(text).size(); }

double StatsRow::tokens_per_trajectory() const {
    return n_trajectories ? static_cast<double>(total_tokens) / static_cast<double>(n_trajectories) : 0.0;
}

double StatsRow::trajectories_per_instruction() const {
    return n_instructions ? static_cast<double>(n_trajectories) / static_cast<double>(n_instructions) : 0.0;
}

namespace {

void accumulate(StatsRow& into, const StatsRow& row) {
    into.n_instructions += row.n_instructions;
    for (std::size_t t = 0; t < into.turns.size(); ++t) into.turns[t] += row.turns[t];
    into.n_trajectories += row.n_trajectories;
    into.total_tokens += row.total_tokens;
    into.total_pairs += row.total_pairs;
    into.n_correct += row.n_correct;
}

}  // namespace

CorpusStats corpus_stats(const std::vector<PreferenceTree>& trees, const std::vector<ActionPair>& pairs,
                         const TokenCounter& counter) {
    // Key orders Math, Coding, Logic; interactive rows before single-turn; tool rows first.
    using Key = std::tuple<int, int, int>;
    std::map<Key, StatsRow> rows;
    std::map<std::string, Key> key_of;
    for (const auto& tree : trees) {
        const auto& inst = tree.instruction;
        const bool interaction = tree.max_depth > 1;
        const Key key{static_cast<int>(inst.task), interaction ? 0 : 1, inst.tool_mode ? 0 : 1};
        key_of[inst.id] = key;
        auto& row = rows[key];
        row.task = inst.task;
        row.interaction = interaction;
        row.tool_mode = inst.tool_mode;
        ++row.n_instructions;

        std::map<std::string, std::size_t> node_tokens;
        for (const auto& [id, n] : tree.nodes) {
            node_tokens[id] = counter(n.body);
            if (n.correct) ++row.n_correct;
        }
        for (const auto& path : trajectories(tree)) {
            const int leaf_turn = tree.node(path.back()).turn;
            ++row.turns[static_cast<std::size_t>(std::clamp(leaf_turn, 1, kMaxTurns) - 1)];
            ++row.n_trajectories;
            for (const auto& id : path) row.total_tokens += node_tokens[id];
        }
    }
    for (const auto& p : pairs) {
        auto it = key_of.find(p.instruction_id);
        if (it != key_of.end()) ++rows[it->second].total_pairs;
    }

    CorpusStats stats;
    for (auto& [_, row] : rows) {
        accumulate(stats.total, row);
        stats.rows.push_back(row);
    }
    return stats;
}

namespace {

json row_json(const StatsRow& r) {
    return json{{"n_instructions", r.n_instructions},
                {"turns", r.turns},
                {"n_trajectories", r.n_trajectories},
                {"tokens_per_trajectory", r.tokens_per_trajectory()},
                {"trajectories_per_instruction", r.trajectories_per_instruction()},
                {"total_pairs", r.total_pairs},
                {"n_correct", r.n_correct}};
}

}  // namespace

json to_json(const CorpusStats& s) {
    json rows = json::array();
    for (const auto& r : s.rows) {
        auto j = row_json(r);
        j["task"] = std::string(to_string(r.task));
        j["interaction"] = r.interaction;
        j["tool_mode"] = r.tool_mode;
        rows.push_back(std::move(j));
    }
    return json{{"rows", rows}, {"total", row_json(s.total)}};
}

std::string format_table(const CorpusStats& s) {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-8s %-5s %-5s %8s %7s %7s %7s %7s %7s %10s %8s %8s %9s\n", "task", "inter", "tool",
                  "instr", "T1", "T2", "T3", "T4", "T5", "tok/traj", "traj/ins", "pairs", "correct");
    out << buf;
    auto line = [&](const std::string& task, const std::string& inter, const std::string& tool, const StatsRow& r) {
        std::snprintf(buf, sizeof buf, "%-8s %-5s %-5s %8zu %7zu %7zu %7zu %7zu %7zu %10.1f %8.1f %8zu %9zu\n",
                      task.c_str(), inter.c_str(), tool.c_str(), r.n_instructions, r.turns[0], r.turns[1], r.turns[2],
                      r.turns[3], r.turns[4], r.tokens_per_trajectory(), r.trajectories_per_instruction(),
                      r.total_pairs, r.n_correct);
        out << buf;
    };
    for (const auto& r : s.rows) {
        line(std::string(to_string(r.task)), r.interaction ? "yes" : "no", r.tool_mode ? "yes" : "no", r);
    }
    line("Total", "-", "-", s.total);
    return out.str();
}

}  // namespace preftree
