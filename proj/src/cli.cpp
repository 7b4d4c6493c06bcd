#include "preftree/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "preftree/builder.hpp"
#include "preftree/config.hpp"
#include "preftree/corpus.hpp"
#include "preftree/decontam.hpp"
#include "preftree/errors.hpp"
#include "preftree/hash.hpp"
#include "preftree/mock.hpp"
#include "preftree/pairs.hpp"
#include "preftree/prefloss.hpp"
#include "preftree/sampling.hpp"
#include "preftree/tree_io.hpp"

namespace preftree {

using nlohmann::json;

namespace {

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    bool resume = false;
    bool dry_run = false;
    std::string format = "table";
};

struct Io {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
    bool dry_run = false;
};

// Reads a whole input; '-' is stdin.
std::string read_input(const std::string& path, Io& io) {
    std::ostringstream buf;
    if (path == "-") {
        buf << io.in.rdbuf();
        return buf.str();
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open " + path);
    buf << f.rdbuf();
    return buf.str();
}

// Outputs are assembled in memory and written only when the command gets that far,
// and never under --dry-run.
void write_output(const std::string& path, const std::string& data, Io& io, bool append = false) {
    if (io.dry_run) {
        io.err << "dry-run: would write " << data.size() << " bytes to " << path << '\n';
        return;
    }
    if (path == "-") {
        io.out << data;
        return;
    }
    std::ofstream f(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!f) throw ConfigError("cannot write " + path);
    f << data;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string pick_path(const std::string& flag, const PipelineConfig& cfg, const std::string& name) {
    return flag.empty() ? cfg.path(name) : flag;
}

std::vector<json> read_jsonl(const std::string& text, const std::string& what) {
    std::vector<json> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(lineno, what + ": " + e.what());
        }
    }
    return out;
}

std::vector<Instruction> read_instructions(const std::string& path, Io& io, bool& had_errors) {
    std::istringstream in(read_input(path, io));
    auto res = ingest(in);
    for (const auto& e : res.errors) io.err << path << ": line " << e.line << ": " << e.message << '\n';
    had_errors = had_errors || !res.errors.empty();
    return std::move(res.instructions);
}

std::vector<PreferenceTree> read_trees(const std::string& path, Io& io) {
    std::istringstream in(read_input(path, io));
    return load_trees(in);
}

std::vector<TestDoc> read_test_docs(const std::string& path, Io& io) {
    std::vector<TestDoc> docs;
    std::size_t k = 0;
    for (const auto& j : read_jsonl(read_input(path, io), path)) {
        ++k;
        if (!j.is_object()) throw ParseError(k, path + ": record is not an object");
        TestDoc d;
        d.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                : path + ":" + std::to_string(k);
        bool found = false;
        for (const char* key : {"text", "prompt", "question"}) {
            if (j.contains(key) && j[key].is_string()) {
                d.text = j[key].get<std::string>();
                found = true;
                break;
            }
        }
        if (!found) throw ParseError(k, path + ": record has no text, prompt or question");
        docs.push_back(std::move(d));
    }
    return docs;
}

std::size_t resolve_jobs(const GlobalOptions& g, const PipelineConfig& cfg) {
    if (g.jobs) {
        if (*g.jobs == 0) throw ConfigError("--jobs must be at least 1");
        return *g.jobs;
    }
    if (cfg.jobs) return *cfg.jobs;
    const std::size_t cores = std::max(1u, std::thread::hardware_concurrency());
    return std::min(cores, cfg.sandbox.pool_size);
}

class Runtime {
public:
    Runtime(const PipelineConfig& cfg, std::vector<Instruction> corpus) : cfg_(cfg), corpus_(std::move(corpus)) {
        templates_ = cfg.prompts_dir ? PromptTemplates::with_overrides(*cfg.prompts_dir) : PromptTemplates::builtin();
    }

    ClientPtr client(const EndpointConfig& e) const {
        if (e.kind == "mock") return make_mock_client(e.mock, corpus_, templates_);
        return std::make_shared<RetryingClient>(std::make_shared<HttpModelClient>(e.http), cfg_.retry);
    }

    ClientPtr role(const std::string& name, bool required) const {
        auto it = cfg_.models.find(name);
        if (it == cfg_.models.end()) {
            if (required) throw ConfigError("models." + name + " is required");
            return nullptr;
        }
        return client(it->second);
    }

    SandboxPtr sandbox() const {
        if (cfg_.sandbox.kind == "stub") return make_toy_sandbox();
        if (cfg_.sandbox.command.empty()) throw ConfigError("sandbox.command is required for the worker sandbox");
        return std::make_shared<WorkerPool>(cfg_.sandbox.command, cfg_.sandbox.pool_size);
    }

    EngineConfig engine_config(ClientPtr actor, ClientPtr critic, SandboxPtr sandbox) const {
        EngineConfig ec;
        ec.actor = std::move(actor);
        ec.critic = std::move(critic);
        ec.sandbox = std::move(sandbox);
        ec.sandbox_pool_size = cfg_.sandbox.pool_size;
        ec.exec_timeout_ms = cfg_.sandbox.timeout_ms;
        ec.memory_mb = cfg_.sandbox.memory_mb;
        ec.max_depth = cfg_.max_depth;
        ec.seed = cfg_.seed;
        ec.sampling = cfg_.sampling;
        ec.budget = cfg_.budget;
        ec.templates = templates_;
        return ec;
    }

    const PromptTemplates& templates() const { return templates_; }

private:
    const PipelineConfig& cfg_;
    std::vector<Instruction> corpus_;
    PromptTemplates templates_;
};

// ---- select ----

int cmd_select(const GlobalOptions& g, PipelineConfig& cfg, Io& io, const std::string& in_flag,
               const std::string& out_flag) {
    const auto in_path = pick_path(in_flag, cfg, "instructions");
    const auto out_path = pick_path(out_flag, cfg, "selected");
    bool had_errors = false;
    auto insts = read_instructions(in_path, io, had_errors);

    insts = select_mathqa(insts, cfg.seed, cfg.mathqa_per_pattern);
    insts = filter_numglue(insts);
    auto tab = filter_tabmwp(insts);
    for (const auto& w : tab.warnings) io.err << "warning: " << w << '\n';
    insts = std::move(tab.kept);

    if (cfg.models.count("probe") && !insts.empty()) {
        Runtime rt(cfg, insts);
        auto probe = rt.role("probe", true);
        Engine engine(rt.engine_config(probe, probe, rt.sandbox()));
        insts = filter_by_probe_failure(insts, engine, *probe, cfg.probe_attempts, cfg.seed, resolve_jobs(g, cfg));
    }

    std::ostringstream os;
    save_instructions(insts, os);
    write_output(out_path, os.str(), io);
    io.err << "selected " << insts.size() << " instructions\n";
    return had_errors ? kExitPartial : kExitOk;
}

// ---- build ----

int cmd_build(const GlobalOptions& g, PipelineConfig& cfg, Io& io, const std::string& in_flag,
              const std::string& out_flag, const std::string& audit_flag) {
    const auto in_path = in_flag.empty() ? (cfg.paths.count("selected") ? cfg.path("selected") : cfg.path("instructions"))
                                         : in_flag;
    const auto out_path = pick_path(out_flag, cfg, "trees");
    const std::string audit_path = !audit_flag.empty() ? audit_flag : cfg.paths.count("audit") ? cfg.path("audit") : "";

    bool had_errors = false;
    auto insts = read_instructions(in_path, io, had_errors);

    std::set<std::string> done;
    if (g.resume && out_path != "-" && std::filesystem::exists(out_path)) {
        for (const auto& t : read_trees(out_path, io)) done.insert(t.instruction.id);
        io.err << "resume: " << done.size() << " trees already built\n";
    }
    std::vector<Instruction> todo;
    for (auto& inst : insts) {
        if (!done.count(inst.id)) todo.push_back(std::move(inst));
    }

    Runtime rt(cfg, todo);
    EngineConfig ec = rt.engine_config(rt.role("actor", true), rt.role("critic", true), rt.sandbox());
    ec.judge = rt.role("judge", false);
    ec.elicitor = rt.role("elicitor", false);
    ec.test_generator = rt.role("test_generator", false);
    for (const auto& e : cfg.tiers) ec.tiers.push_back(rt.client(e));
    for (const auto& e : cfg.incorrect_pool) ec.incorrect_pool.push_back(rt.client(e));
    ec.validate();

    json audit = json::array();
    auto audit_line = [&](json j) { audit.push_back(std::move(j)); };

    if (io.dry_run) {
        for (const auto& inst : todo) {
            for (const auto& v : validate_instruction(inst)) io.err << inst.id << ": " << v << '\n';
        }
        io.err << "dry-run: " << todo.size() << " instructions would be built\n";
        return had_errors ? kExitPartial : kExitOk;
    }

    Engine engine(ec);
    std::size_t failures = 0;
    for (auto& inst : todo) {
        const auto& gt = inst.ground_truth;
        if (inst.task != Task::Coding || !gt.test_cases.empty() || gt.solutions.empty()) continue;
        ModelClient& gen = ec.test_generator ? *ec.test_generator : *ec.critic;
        try {
            auto res = engine.generate_test_cases(inst, gt.solutions.front(), gen);
            inst.ground_truth.test_cases = std::move(res.cases);
            for (const auto& w : res.warnings) audit_line({{"instruction_id", inst.id}, {"warning", w}});
        } catch (const std::exception& e) {
            audit_line({{"instruction_id", inst.id}, {"error", std::string("test generation: ") + e.what()}});
        }
    }

    Sampler sampler(engine);
    const auto items = build_batch(todo, engine, sampler, cfg.seed, resolve_jobs(g, cfg));

    std::vector<PreferenceTree> trees;
    for (const auto& item : items) {
        if (!item.result) {
            ++failures;
            audit_line({{"instruction_id", item.instruction_id}, {"error", item.error}});
            io.err << item.instruction_id << ": " << item.error << '\n';
            continue;
        }
        for (const auto& r : item.result->audit) audit_line(to_json(r));
        for (const auto& w : item.result->warnings) audit_line({{"instruction_id", item.instruction_id}, {"warning", w}});
        trees.push_back(item.result->tree);
    }

    std::ostringstream os;
    save_trees(trees, os);
    write_output(out_path, os.str(), io, g.resume && !done.empty());
    if (!audit_path.empty()) {
        std::string lines;
        for (const auto& a : audit) lines += a.dump() + '\n';
        write_output(audit_path, lines, io, g.resume && !done.empty());
    }
    io.err << "built " << trees.size() << " trees, " << failures << " failed\n";
    return failures || had_errors ? kExitPartial : kExitOk;
}

// ---- export ----

int cmd_export(PipelineConfig& cfg, Io& io, const std::string& in_flag, const std::string& sft_flag,
               const std::string& pref_flag, const std::string& mode) {
    const auto in_path = pick_path(in_flag, cfg, "trees");
    const std::string sft_path = !sft_flag.empty() ? sft_flag : cfg.paths.count("sft") ? cfg.path("sft") : "";
    const std::string pref_path =
        !pref_flag.empty() ? pref_flag : cfg.paths.count("preference") ? cfg.path("preference") : "";
    if (sft_path.empty() && pref_path.empty()) throw ConfigError("export needs --sft and/or --preference");
    const auto trees = read_trees(in_path, io);

    if (!sft_path.empty()) {
        const auto records = export_sft(trees, mode == "all" ? SftMode::AllCorrect : SftMode::LeafOnly);
        std::string lines;
        for (const auto& r : records) lines += to_json(r).dump() + '\n';
        write_output(sft_path, lines, io);
        io.err << "sft records: " << records.size() << '\n';
    }
    if (!pref_path.empty()) {
        const auto records = export_preference(trees, cfg.augment);
        std::string lines;
        for (const auto& r : records) lines += to_json(r).dump() + '\n';
        write_output(pref_path, lines, io);
        io.err << "preference pairs: " << records.size() << '\n';
    }
    return kExitOk;
}

// ---- decontam ----

int cmd_decontam(const GlobalOptions& g, PipelineConfig& cfg, Io& io, const std::string& in_flag,
                 const std::string& out_flag, const std::string& report_flag,
                 const std::vector<std::string>& test_set_flags, const std::vector<std::string>& code_flags) {
    const auto in_path = pick_path(in_flag, cfg, "instructions");
    const auto out_path = pick_path(out_flag, cfg, "kept");
    const auto report_path = pick_path(report_flag, cfg, "report");

    auto sets = cfg.test_sets;
    for (const auto& spec : test_set_flags) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("--test-set expects TASK=PATH, got " + spec);
        Task task;
        try {
            task = parse_task(spec.substr(0, eq));
        } catch (const std::invalid_argument&) {
            throw ConfigError("--test-set: unknown task " + spec.substr(0, eq));
        }
        sets[task].push_back(spec.substr(eq + 1));
    }
    auto code_files = cfg.code_corpus;
    code_files.insert(code_files.end(), code_flags.begin(), code_flags.end());

    std::map<Task, std::vector<TestDoc>> docs;
    for (const auto& [task, files] : sets) {
        auto& v = docs[task];
        for (const auto& f : files) {
            auto more = read_test_docs(f, io);
            v.insert(v.end(), more.begin(), more.end());
        }
    }
    std::vector<TestDoc> code;
    for (const auto& f : code_files) {
        auto more = read_test_docs(f, io);
        code.insert(code.end(), more.begin(), more.end());
    }

    bool had_errors = false;
    const auto insts = read_instructions(in_path, io, had_errors);
    auto dc = cfg.decontam;
    dc.jobs = resolve_jobs(g, cfg);
    const auto result = filter_corpus(insts, docs, code, dc);

    std::ostringstream kept;
    save_instructions(result.kept, kept);
    write_output(out_path, kept.str(), io);
    std::string report;
    for (const auto& r : result.reports) report += to_json(r).dump() + '\n';
    write_output(report_path, report, io);
    io.err << "kept " << result.kept.size() << ", removed " << result.removed.size() << '\n';
    for (const auto& r : result.removed) io.err << "contaminated: " << r.id << '\n';
    return result.removed.empty() && !had_errors ? kExitOk : kExitPartial;
}

// ---- losslab ----

struct InvarianceProbe {
    std::string name;
    double max_change = 0.0;
};

// Largest loss change under a common shift of both inputs, over a fixed grid.
std::vector<InvarianceProbe> invariance_probes(double shift, double beta, double lambda_ratio) {
    const std::vector<double> grid = {-3.0, -1.25, -0.5, 0.0, 0.75, 2.0, 4.5};
    std::vector<InvarianceProbe> out = {{"BT", 0}, {"DPO", 0}, {"DR", 0}, {"KTO", 0}, {"NCA", 0}};
    for (double a : grid) {
        for (double b : grid) {
            const double changes[] = {
                std::abs(bt_loss(a + shift, b + shift).loss - bt_loss(a, b).loss),
                std::abs(dpo_loss({a + shift, b + shift}, beta).loss - dpo_loss({a, b}, beta).loss),
                std::abs(dr_loss(a + shift, b + shift).loss - dr_loss(a, b).loss),
                std::abs(kto_loss({a + shift, b + shift}, beta, lambda_ratio).loss -
                         kto_loss({a, b}, beta, lambda_ratio).loss),
                std::abs(nca_loss({a + shift, b + shift}, beta).loss - nca_loss({a, b}, beta).loss),
            };
            for (std::size_t k = 0; k < out.size(); ++k) out[k].max_change = std::max(out[k].max_change, changes[k]);
        }
    }
    return out;
}

inline constexpr double kInvariantTolerance = 1e-12;

int cmd_losslab(const GlobalOptions& g, PipelineConfig& cfg, Io& io, const std::string& out_flag) {
    const auto& lab = cfg.losslab;
    const std::string trace_path = !out_flag.empty() ? out_flag : cfg.paths.count("trace") ? cfg.path("trace") : "";

    Rng data_rng(derive_seed(cfg.seed, "losslab"));
    const auto data = synthetic_pairs(lab.pairs, lab.dim, lab.separation, data_rng);
    const auto trained = train_toy_rm(data, lab.train);

    auto bt_cfg = lab.train;
    bt_cfg.objective = Objective::BradleyTerry;
    const auto bt_trained = train_toy_rm(data, bt_cfg);
    const double bias_drift = std::abs(bt_trained.params.b - bt_cfg.bias_init);

    Rng fd_rng(derive_seed(cfg.seed, "fd"));
    const auto fd = check_gradients(lab.fd_points, fd_rng, 1e-5, lab.beta, lab.lambda_ratio);
    const auto probes = invariance_probes(1.0, lab.beta, lab.lambda_ratio);

    if (!trace_path.empty()) {
        std::ostringstream csv;
        write_trace_csv(trained.trace, csv);
        write_output(trace_path, csv.str(), io);
    }

    const auto& t = trained.trace;
    const auto final_params = trained.params;
    double chosen = 0, rejected = 0;
    for (const auto& ex : data) {
        chosen += final_params.reward(ex.chosen);
        rejected += final_params.reward(ex.rejected);
    }
    chosen /= static_cast<double>(data.size());
    rejected /= static_cast<double>(data.size());

    json report = {{"steps", t.margin.size()},
                   {"final_chosen_mean", chosen},
                   {"final_rejected_mean", rejected},
                   {"final_margin", chosen - rejected},
                   {"bt_bias_drift", bias_drift},
                   {"fd_points", fd.points},
                   {"fd_max_rel_err", fd.max_rel_error},
                   {"invariance", json::object()}};
    for (const auto& p : probes) {
        report["invariance"][p.name] = {{"invariant", p.max_change <= kInvariantTolerance},
                                        {"max_change", p.max_change}};
    }

    std::ostream& sink = trace_path == "-" ? io.err : io.out;
    if (g.format == "json") {
        sink << report.dump(2) << '\n';
    } else {
        sink << std::setprecision(6);
        sink << "steps " << t.margin.size() << '\n';
        sink << "final chosen mean " << chosen << '\n';
        sink << "final rejected mean " << rejected << '\n';
        for (const auto& p : probes) {
            sink << p.name << "-invariant=" << (p.max_change <= kInvariantTolerance ? "true" : "false")
                 << " (max change " << p.max_change << ")\n";
        }
        sink << "BT bias drift " << bias_drift << '\n';
        sink << "FD max rel err " << fd.max_rel_error << " over " << fd.points << " points\n";
    }
    return kExitOk;
}

// ---- rerank ----

struct CandidatePool {
    std::string id;
    std::vector<std::string> ids;
    std::vector<std::string> answers;
    std::vector<bool> correct;
};

std::string id_of(const json& j, std::size_t line, const std::string& what) {
    if (!j.is_object() || !j.contains("id")) throw ParseError(line, what + ": record lacks id");
    return j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
}

int cmd_rerank(const GlobalOptions& g, PipelineConfig& cfg, Io& io, const std::string& cand_flag,
               const std::string& rew_flag, const std::string& out_flag, std::size_t n) {
    const auto cand_path = pick_path(cand_flag, cfg, "candidates");
    const auto rew_path = pick_path(rew_flag, cfg, "rewards");
    const std::string out_path = !out_flag.empty() ? out_flag : cfg.paths.count("winners") ? cfg.path("winners") : "";

    std::vector<CandidatePool> pools;
    std::set<std::string> seen;
    std::size_t line = 0;
    for (const auto& j : read_jsonl(read_input(cand_path, io), cand_path)) {
        ++line;
        CandidatePool p;
        p.id = id_of(j, line, cand_path);
        if (!seen.insert(p.id).second) throw ParseError(line, cand_path + ": duplicate id " + p.id);
        if (!j.contains("candidates") || !j["candidates"].is_array() || j["candidates"].empty()) {
            throw ParseError(line, cand_path + ": candidates must be a non-empty list");
        }
        for (const auto& c : j["candidates"]) {
            p.ids.push_back(id_of(c, line, cand_path));
            p.answers.push_back(c.value("answer", std::string{}));
            p.correct.push_back(c.value("correct", false));
        }
        pools.push_back(std::move(p));
    }

    std::map<std::string, json> rewards;
    line = 0;
    for (const auto& j : read_jsonl(read_input(rew_path, io), rew_path)) {
        ++line;
        const auto id = id_of(j, line, rew_path);
        if (!j.contains("rewards") || !j["rewards"].is_object()) throw ParseError(line, rew_path + ": rewards must be an object");
        if (!rewards.emplace(id, j["rewards"]).second) throw ParseError(line, rew_path + ": duplicate id " + id);
    }
    if (rewards.size() != pools.size()) throw ValidationError({"candidate and reward files cover different ids"});

    std::vector<std::vector<double>> reward_rows;
    std::vector<std::vector<bool>> correct_rows;
    std::size_t sc_hits = 0;
    std::size_t max_n = 0;
    std::string winners;
    for (const auto& p : pools) {
        auto it = rewards.find(p.id);
        if (it == rewards.end()) throw ValidationError({"no rewards for " + p.id});
        if (it->second.size() != p.ids.size()) throw ValidationError({p.id + ": reward ids differ from candidate ids"});
        std::vector<double> row;
        for (const auto& cid : p.ids) {
            if (!it->second.contains(cid) || !it->second[cid].is_number()) {
                throw ValidationError({p.id + ": no numeric reward for candidate " + cid});
            }
            row.push_back(it->second[cid].get<double>());
        }
        const std::size_t k = n == 0 ? row.size() : std::min(n, row.size());
        max_n = std::max(max_n, k);
        const auto best = rerank(std::vector<double>(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k)));
        const std::vector<std::string> head(p.answers.begin(), p.answers.begin() + static_cast<std::ptrdiff_t>(k));
        const auto majority = self_consistency(head);
        const auto pos = static_cast<std::size_t>(std::find(head.begin(), head.end(), majority) - head.begin());
        sc_hits += p.correct[pos] ? 1 : 0;
        winners += json{{"id", p.id},
                        {"winner", p.ids[best]},
                        {"answer", p.answers[best]},
                        {"correct", static_cast<bool>(p.correct[best])}}
                       .dump() +
                   '\n';
        reward_rows.push_back(std::move(row));
        correct_rows.push_back(p.correct);
    }
    const std::size_t eff_n = n == 0 ? max_n : n;
    const double pass = pass_at_n_rate(correct_rows, eff_n);
    const double acc = rerank_accuracy(reward_rows, correct_rows, eff_n);
    const double sc = pools.empty() ? 0.0 : static_cast<double>(sc_hits) / static_cast<double>(pools.size());

    if (!out_path.empty()) write_output(out_path, winners, io);
    std::ostream& sink = out_path == "-" ? io.err : io.out;
    if (g.format == "json") {
        sink << json{{"n", eff_n},
                     {"instructions", pools.size()},
                     {"pass_at_n", pass},
                     {"rerank_accuracy", acc},
                     {"self_consistency_accuracy", sc}}
                    .dump(2)
             << '\n';
    } else {
        sink << std::fixed << std::setprecision(4);
        sink << std::left << std::setw(28) << "N" << eff_n << '\n';
        sink << std::left << std::setw(28) << "instructions" << pools.size() << '\n';
        sink << std::left << std::setw(28) << "pass@N" << pass << '\n';
        sink << std::left << std::setw(28) << "rerank accuracy" << acc << '\n';
        sink << std::left << std::setw(28) << "self-consistency accuracy" << sc << '\n';
        sink << std::defaultfloat;
    }
    return kExitOk;
}

// ---- stats ----

int cmd_stats(const GlobalOptions& g, PipelineConfig& cfg, Io& io, const std::string& in_flag) {
    const auto trees = read_trees(pick_path(in_flag, cfg, "trees"), io);
    std::vector<ActionPair> pairs;
    for (const auto& r : export_preference(trees, cfg.augment)) pairs.push_back(r.pair);
    const auto stats = corpus_stats(trees, pairs);
    if (g.format == "json") {
        io.out << to_json(stats).dump(2) << '\n';
    } else {
        io.out << format_table(stats);
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Preference-tree data construction and preference-objective lab", "preftree"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    std::uint64_t seed = 0;
    std::size_t jobs = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Global seed");
    auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads");
    app.add_option("--config", g.config, "Config file (JSON)");
    app.add_flag("--resume", g.resume, "Skip instructions already in the output");
    app.add_flag("--dry-run", g.dry_run, "Validate inputs without writing outputs");
    app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"json", "table"}));

    std::string input, output, audit, sft, preference, report, candidates, rewards_path, mode = "leaf";
    std::vector<std::string> test_sets, code_corpus;
    std::size_t n = 0;

    auto* select = app.add_subcommand("select", "Filter an instruction corpus");
    select->add_option("--input", input, "Instructions JSONL ('-' for stdin)");
    select->add_option("--output", output, "Selected instructions JSONL ('-' for stdout)");

    auto* build = app.add_subcommand("build", "Build preference trees");
    build->add_option("--input", input, "Instructions JSONL");
    build->add_option("--output", output, "Trees JSONL");
    build->add_option("--audit", audit, "Audit log JSONL");

    auto* exp = app.add_subcommand("export", "Export SFT and preference data");
    exp->add_option("--input", input, "Trees JSONL");
    exp->add_option("--sft", sft, "SFT JSONL output");
    exp->add_option("--preference", preference, "Preference JSONL output");
    exp->add_option("--mode", mode, "SFT nodes: leaf or all")->check(CLI::IsMember({"leaf", "all"}));

    auto* decontam = app.add_subcommand("decontam", "Remove instructions that overlap test sets");
    decontam->add_option("--input", input, "Instructions JSONL");
    decontam->add_option("--output", output, "Kept instructions JSONL");
    decontam->add_option("--report", report, "Match report JSONL");
    decontam->add_option("--test-set", test_sets, "TASK=PATH test documents (repeatable)");
    decontam->add_option("--code-corpus", code_corpus, "Code test documents for substring matching (repeatable)");

    auto* losslab = app.add_subcommand("losslab", "Toy reward-model training and loss checks");
    losslab->add_option("--output", output, "Reward trace CSV");

    auto* rerank_cmd = app.add_subcommand("rerank", "Best-of-N reranking report");
    rerank_cmd->add_option("--candidates", candidates, "Candidates JSONL");
    rerank_cmd->add_option("--rewards", rewards_path, "Rewards JSONL");
    rerank_cmd->add_option("--output", output, "Winners JSONL");
    rerank_cmd->add_option("--n", n, "Candidates considered per instruction (0 = all)");

    auto* stats = app.add_subcommand("stats", "Corpus statistics for a tree file");
    stats->add_option("--input", input, "Trees JSONL");

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }
    if (*seed_opt) g.seed = seed;
    if (*jobs_opt) g.jobs = jobs;

    Io io{in, out, err, g.dry_run};
    try {
        PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
        if (g.seed) {
            cfg.seed = *g.seed;
            cfg.losslab.train.seed = *g.seed;
            cfg.augment.seed = *g.seed;
            cfg.overrides.push_back("seed = " + std::to_string(*g.seed) + " (command line)");
        }
        if (g.jobs) cfg.overrides.push_back("jobs = " + std::to_string(*g.jobs) + " (command line)");
        for (const auto& o : cfg.overrides) err << "config: " << o << '\n';

        if (select->parsed()) return cmd_select(g, cfg, io, input, output);
        if (build->parsed()) return cmd_build(g, cfg, io, input, output, audit);
        if (exp->parsed()) return cmd_export(cfg, io, input, sft, preference, mode);
        if (decontam->parsed()) return cmd_decontam(g, cfg, io, input, output, report, test_sets, code_corpus);
        if (losslab->parsed()) return cmd_losslab(g, cfg, io, output);
        if (rerank_cmd->parsed()) return cmd_rerank(g, cfg, io, candidates, rewards_path, output, n);
        if (stats->parsed()) return cmd_stats(g, cfg, io, input);
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitPartial;
    }
}

}  // namespace preftree
