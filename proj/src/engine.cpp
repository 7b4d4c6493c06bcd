#include "preftree/engine.hpp"

#include <algorithm>

#include "preftree/errors.hpp"

namespace preftree {

using nlohmann::json;

void EngineConfig::validate() const {
    if (!actor) throw ConfigError("engine: actor client missing");
    if (!critic) throw ConfigError("engine: critique client missing");
    if (!sandbox) throw ConfigError("engine: sandbox missing");
    if (max_depth < 1 || max_depth > kMaxTurns) throw ConfigError("engine: max_depth must be in [1,5]");
    if (exec_timeout_ms <= 0) throw ConfigError("engine: exec timeout must be positive");
    if (budget.samples_per_round < 1 || budget.max_rounds < 1) throw ConfigError("engine: empty ladder budget");
}

ReasoningSchema sample_schema(Rng& rng) {
    return rng.uniform(2) == 0 ? ReasoningSchema::ChainOfThought : ReasoningSchema::ModularProgramming;
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) { config_.validate(); }

std::string Engine::render_observation(const Observation& obs) {
    std::string s;
    if (obs.exec_output && !obs.exec_output->empty()) s += "Out: " + *obs.exec_output + "\n";
    if (obs.traceback) s += "Traceback:\n" + *obs.traceback + "\n";
    s += obs.binary_feedback ? "Your answer is correct." : "Your answer is wrong.";
    return s;
}

std::string Engine::render_ground_truth(const Instruction& inst) {
    const auto& gt = inst.ground_truth;
    std::string s;
    if (gt.answer) s += "Answer: " + *gt.answer + "\n";
    if (gt.rationale) s += "Rationale:\n" + *gt.rationale + "\n";
    if (!gt.solutions.empty()) s += "Reference solution:\n```python\n" + gt.solutions.front() + "\n```\n";
    if (s.empty()) s = "(no reference available)\n";
    return s;
}

std::vector<ChatMessage> Engine::actor_messages(const Instruction& inst, const std::vector<ActionNode>& history,
                                                ReasoningSchema schema) const {
    const auto& t = config_.templates;
    std::vector<ChatMessage> msgs;
    msgs.push_back({"system", t.get(schema == ReasoningSchema::ChainOfThought ? "actor_cot" : "actor_modular")});
    msgs.push_back({"user", render(t.get("actor_user"), {{"instruction", inst.prompt}})});
    for (const auto& turn : history) {
        msgs.push_back({"assistant", turn.body});
        const std::string obs = turn.observation ? render_observation(*turn.observation) : "";
        const std::string crit = turn.critique ? turn.critique->text : "";
        msgs.push_back({"user", render(t.get("feedback"), {{"observation", obs}, {"critique", crit}})});
    }
    return msgs;
}

ActionNode Engine::make_action(const Instruction& inst, const std::vector<ActionNode>& history, std::string body,
                               ReasoningSchema schema, const std::string& producer) const {
    (void)inst;
    ActionNode n;
    n.turn = static_cast<int>(history.size()) + 1;
    if (!history.empty()) n.parent_id = history.back().id;
    n.content_kind = classify_content(body);
    n.body = std::move(body);
    n.schema = schema;
    n.producer = producer;
    return n;
}

std::vector<ActionNode> Engine::run_actions(const Instruction& inst, const std::vector<ActionNode>& history,
                                            ModelClient& client, const std::vector<ReasoningSchema>& schemas) const {
    std::vector<ActionNode> out(schemas.size());
    for (auto schema : {ReasoningSchema::ChainOfThought, ReasoningSchema::ModularProgramming}) {
        const auto count = std::count(schemas.begin(), schemas.end(), schema);
        if (count == 0) continue;
        auto params = config_.sampling;
        params.n = static_cast<int>(count);
        auto texts = client.complete(actor_messages(inst, history, schema), params);
        std::size_t k = 0;
        for (std::size_t i = 0; i < schemas.size(); ++i) {
            if (schemas[i] != schema) continue;
            if (texts[k].empty()) throw ClientError("empty completion from " + client.model());
            out[i] = make_action(inst, history, std::move(texts[k++]), schema, client.model());
        }
    }
    return out;
}

ActionNode Engine::run_action(const Instruction& inst, const std::vector<ActionNode>& history, ModelClient& client,
                              ReasoningSchema schema) const {
    return run_actions(inst, history, client, {schema}).front();
}

ExecResponse Engine::run_code(const std::string& code, const std::string& stdin_text) const {
    ExecRequest req;
    req.kind = ExecKind::Run;
    req.code = code;
    req.stdin_text = stdin_text;
    req.timeout_ms = config_.exec_timeout_ms;
    req.memory_mb = config_.memory_mb;
    return config_.sandbox->execute(req);
}

namespace {

bool run_failed(const ExecResponse& r) { return r.timed_out || r.traceback.has_value() || r.exit_status != 0; }

std::string failure_text(const ExecResponse& r) {
    if (r.timed_out) return "TimeoutError: execution exceeded the time limit";
    if (r.traceback) return *r.traceback;
    return r.stderr_text.empty() ? "exit status " + std::to_string(r.exit_status) : r.stderr_text;
}

}  // namespace

EvalVerdict Engine::evaluate_with_tests(const std::string& code, const Instruction& inst) const {
    EvalVerdict v;
    if (code.empty()) {
        v.detail = "no code block in action";
        return v;
    }
    std::size_t passed = 0;
    std::string failing;
    const auto& cases = inst.ground_truth.test_cases;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        auto r = run_code(code, cases[i].input);
        TestOutcome t;
        t.actual = r.stdout_text;
        t.timed_out = r.timed_out;
        if (run_failed(r)) {
            t.traceback = failure_text(r);
        } else {
            t.passed = outputs_match(r.stdout_text, cases[i].expected_output);
        }
        if (t.passed) {
            ++passed;
        } else {
            failing += (failing.empty() ? "" : ",") + std::to_string(i);
        }
        v.tests.push_back(std::move(t));
    }
    v.correct = passed == cases.size();
    v.detail = std::to_string(passed) + "/" + std::to_string(cases.size()) + " tests passed";
    if (!failing.empty()) v.detail += "; failing cases: " + failing;
    return v;
}

EvalVerdict Engine::evaluate_answer(const ActionNode& action, const Instruction& inst) const {
    EvalVerdict v;
    const std::string& gold = *inst.ground_truth.answer;
    const bool numeric = parse_number(gold).has_value();
    auto predicted = extract_final_answer(action.body, config_.step_marker, numeric);
    if (!predicted) {
        // Tool-mode answers may only appear in the program's printed output.
        const auto code = joined_code(action.body);
        if (!code.empty()) {
            auto r = run_code(code, "");
            if (!run_failed(r)) {
                auto lines = normalize_output(r.stdout_text);
                if (numeric) {
                    auto toks = numeric_tokens(r.stdout_text);
                    if (!toks.empty()) predicted = toks.back();
                } else if (!lines.empty()) {
                    predicted = trim(lines.back());
                }
            }
        }
    }
    if (!predicted) {
        v.detail = "no final answer found";
        return v;
    }
    v.correct = answers_match(*predicted, gold);
    v.detail = "predicted " + *predicted + " vs gold " + gold;
    return v;
}

EvalVerdict Engine::evaluate_with_judge(const ActionNode& action, const Instruction& inst) const {
    if (!config_.judge) {
        throw ConfigError("instruction " + inst.id + " has no tests or answer and no judge client is configured");
    }
    auto params = config_.sampling;
    params.n = 1;
    params.temperature = 0.0;
    const auto prompt = render(config_.templates.get("judge"), {{"instruction", inst.prompt}, {"action", action.body}});
    auto reply = config_.judge->complete({{"user", prompt}}, params).front();
    EvalVerdict v;
    v.rigorous = false;
    const auto first_line = trim(reply.substr(0, reply.find('\n')));
    v.correct = first_line == "VERDICT: CORRECT";
    v.detail = reply;
    return v;
}

EvalVerdict Engine::evaluate(const ActionNode& action, const Instruction& inst) const {
    if (requires_judge(inst)) return evaluate_with_judge(action, inst);
    if (inst.task == Task::Coding) return evaluate_with_tests(joined_code(action.body), inst);
    return evaluate_answer(action, inst);
}

Assessment Engine::assess(const ActionNode& action, const Instruction& inst) const {
    Assessment a;
    a.verdict = evaluate(action, inst);
    const auto code = joined_code(action.body);
    if (!a.verdict.tests.empty()) {
        // The first test run doubles as the observation.
        const auto& first = a.verdict.tests.front();
        a.observation.exec_output = first.actual;
        a.observation.traceback = first.traceback;
        a.observation.timed_out = first.timed_out;
    } else if (!code.empty()) {
        auto r = run_code(code, "");
        a.observation.exec_output = r.stdout_text;
        a.observation.timed_out = r.timed_out;
        if (run_failed(r)) a.observation.traceback = failure_text(r);
    }
    a.observation.binary_feedback = a.verdict.correct;
    return a;
}

Observation Engine::observe(const ActionNode& action, const Instruction& inst) const {
    return assess(action, inst).observation;
}

Critique Engine::critique(const ActionNode& action, const Observation& observation, const Instruction& inst,
                          const std::vector<ActionNode>& history, ModelClient& client) const {
    std::string hist;
    for (const auto& turn : history) {
        hist += "Turn " + std::to_string(turn.turn) + " attempt:\n" + turn.body + "\n";
        if (turn.observation) hist += "Observation:\n" + render_observation(*turn.observation) + "\n";
        if (turn.critique) hist += "Feedback:\n" + turn.critique->text + "\n";
    }
    if (hist.empty()) hist = "(none)";
    const auto prompt = render(config_.templates.get("critique"), {{"instruction", inst.prompt},
                                                                   {"history", hist},
                                                                   {"action", action.body},
                                                                   {"observation", render_observation(observation)},
                                                                   {"ground_truth", render_ground_truth(inst)}});
    auto params = config_.sampling;
    params.n = 1;
    auto text = client.complete({{"user", prompt}}, params).front();
    if (trim(text).empty()) throw ClientError("empty critique from " + client.model());
    return Critique{std::move(text), client.model()};
}

TestGenResult Engine::generate_test_cases(const Instruction& problem, const std::string& gold_solution,
                                          ModelClient& client) const {
    auto params = config_.sampling;
    params.n = 1;
    const auto prompt = render(config_.templates.get("testgen"),
                               {{"instruction", problem.prompt}, {"solution", gold_solution}});
    const auto reply = client.complete({{"user", prompt}}, params).front();

    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ParseError(0, "test generator reply has no JSON object");
    }
    json j;
    try {
        j = json::parse(reply.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("test generator reply is not valid JSON: ") + e.what());
    }

    TestGenResult result;
    const std::pair<const char*, TestCategory> groups[] = {
        {"basic", TestCategory::Basic}, {"edge", TestCategory::Edge}, {"large", TestCategory::Large}};
    std::size_t requested = 0;
    for (const auto& [key, category] : groups) {
        if (!j.contains(key) || !j[key].is_array()) {
            throw ParseError(0, std::string("test generator reply lacks a \"") + key + "\" list");
        }
        for (const auto& item : j[key]) {
            ++requested;
            std::string input = item.is_string() ? item.get<std::string>() : item.dump();
            auto r = run_code(gold_solution, input);
            if (run_failed(r)) {
                result.warnings.push_back(std::string("gold solution failed on ") + key + " input #" +
                                          std::to_string(requested) + ": " + failure_text(r));
                continue;
            }
            std::string expected;
            for (const auto& line : normalize_output(r.stdout_text)) {
                if (!expected.empty()) expected.push_back('\n');
                expected += line;
            }
            result.cases.push_back({std::move(input), std::move(expected), category});
        }
    }
    if (result.cases.empty()) {
        result.warnings.push_back("instruction " + problem.id + ": gold solution failed on all " +
                                  std::to_string(requested) + " generated inputs");
    }
    return result;
}

}  // namespace preftree
