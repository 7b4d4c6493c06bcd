#include "preftree/sampling.hpp"

#include <algorithm>
#include <cctype>

#include "preftree/errors.hpp"

namespace preftree {

using nlohmann::json;

int LadderReport::samples_used() const {
    int n = elicitation_attempts;
    for (const auto& r : rounds) n += r.samples;
    return n;
}

json to_json(const LadderReport& r) {
    json rounds = json::array();
    for (const auto& round : r.rounds) {
        rounds.push_back(json{{"tier", round.tier}, {"samples", round.samples}, {"n_correct", round.n_correct}});
    }
    return json{{"instruction_id", r.instruction_id},
                {"turn", r.turn},
                {"rounds", rounds},
                {"elicited", r.elicited},
                {"elicitation_attempts", r.elicitation_attempts},
                {"correct_found", r.correct_found},
                {"incorrect_found", r.incorrect_found}};
}

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

}  // namespace

MaskResult mask_answer_numbers(std::string_view rationale, std::string_view final_answer) {
    MaskResult result;
    const std::string answer = trim(final_answer);
    std::vector<std::pair<std::size_t, std::size_t>> hits;

    if (parse_number(answer)) {
        for (auto [b, e] : numeric_token_spans(rationale)) {
            const bool standalone = (b == 0 || !word_char(rationale[b - 1]) || rationale[b] == '-') &&
                                    (e == rationale.size() || !word_char(rationale[e]));
            if (standalone && answers_match(rationale.substr(b, e - b), answer)) hits.emplace_back(b, e);
        }
    } else if (!answer.empty()) {
        std::size_t pos = 0;
        while ((pos = rationale.find(answer, pos)) != std::string_view::npos) {
            const std::size_t end = pos + answer.size();
            const bool standalone = (pos == 0 || !word_char(rationale[pos - 1]) || !word_char(answer.front())) &&
                                    (end == rationale.size() || !word_char(rationale[end]) || !word_char(answer.back()));
            if (standalone) {
                hits.emplace_back(pos, end);
                pos = end;
            } else {
                ++pos;
            }
        }
    }

    std::size_t cursor = 0;
    for (auto [b, e] : hits) {
        result.text.append(rationale.substr(cursor, b - cursor));
        result.text.append(kMaskToken);
        cursor = e;
    }
    result.text.append(rationale.substr(cursor));
    result.masked = hits.size();
    if (hits.empty()) result.warning = "answer " + answer + " does not occur in the rationale";
    return result;
}

bool syntax_check(Sandbox& sandbox, const std::string& code, int timeout_ms) {
    ExecRequest req;
    req.kind = ExecKind::SyntaxCheck;
    req.code = code;
    req.timeout_ms = timeout_ms;
    auto resp = sandbox.execute(req);
    if (!resp.syntax_ok) throw SandboxError("syntax check reply lacks syntax_ok");
    return *resp.syntax_ok;
}

Sampler::Sampler(const Engine& engine, std::vector<ClientPtr> tiers, std::vector<ClientPtr> pool)
    : engine_(engine), tiers_(std::move(tiers)), pool_(std::move(pool)) {
    const auto& cfg = engine_.config();
    if (tiers_.empty()) tiers_ = cfg.tiers;
    if (tiers_.empty()) tiers_.push_back(cfg.actor);
    if (pool_.empty()) pool_ = cfg.incorrect_pool;
    if (pool_.empty()) pool_.push_back(cfg.actor);
}

ModelClient& Sampler::elicitor() const {
    const auto& cfg = engine_.config();
    if (cfg.elicitor) return *cfg.elicitor;
    return *tiers_.front();
}

std::vector<Candidate> Sampler::screen(const Instruction& inst, std::vector<ActionNode> actions) const {
    std::vector<Candidate> out;
    for (auto& a : actions) {
        const auto code = joined_code(a.body);
        if (!code.empty() && !syntax_check(engine_.sandbox(), code, engine_.config().exec_timeout_ms)) continue;
        auto assessed = engine_.assess(a, inst);
        a.correct = assessed.verdict.correct;
        a.observation = std::move(assessed.observation);
        out.push_back({std::move(a), std::move(assessed.verdict)});
    }
    return out;
}

CorrectSample Sampler::sample_correct(const Instruction& inst, const std::vector<ActionNode>& history, Rng& rng) const {
    CorrectSample out;
    out.report.instruction_id = inst.id;
    out.report.turn = static_cast<int>(history.size()) + 1;
    const auto& budget = engine_.config().budget;

    for (int round = 0; round < budget.max_rounds; ++round) {
        const std::size_t tier = std::min<std::size_t>(static_cast<std::size_t>(round), tiers_.size() - 1);
        std::vector<ReasoningSchema> schemas(static_cast<std::size_t>(budget.samples_per_round));
        for (auto& s : schemas) s = sample_schema(rng);
        auto candidates = screen(inst, engine_.run_actions(inst, history, *tiers_[tier], schemas));

        std::vector<std::size_t> correct;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (candidates[i].node.correct) correct.push_back(i);
        }
        out.report.rounds.push_back({tier, budget.samples_per_round, static_cast<int>(correct.size())});
        if (!correct.empty()) {
            out.action = std::move(candidates[correct[rng.uniform(correct.size())]]);
            out.report.correct_found = true;
            return out;
        }
    }

    out.reached_elicitation = true;
    auto elicited = elicit_with_ground_truth(inst, history, elicitor(), rng);
    out.report.elicitation_attempts = elicited.attempts;
    if (elicited.action) {
        out.report.elicited = true;
        out.report.correct_found = true;
        out.action = std::move(elicited.action);
    }
    return out;
}

std::optional<Candidate> Sampler::elicit_once(const Instruction& inst, const std::vector<ActionNode>& history,
                                              ModelClient& client, Rng& rng, const std::string* solution,
                                              std::string& reason) const {
    const auto& t = engine_.config().templates;
    const auto& gt = inst.ground_truth;
    auto params = engine_.config().sampling;
    params.n = 1;

    std::string prompt;
    ReasoningSchema schema = ReasoningSchema::ChainOfThought;
    if (inst.task == Task::Coding) {
        prompt = render(t.get("elicit_coding"), {{"instruction", inst.prompt}, {"solution", *solution}});
    } else if (!inst.tool_mode) {
        auto masked = gt.answer ? mask_answer_numbers(*gt.rationale, *gt.answer) : MaskResult{*gt.rationale, 0, {}};
        prompt = render(t.get("elicit_math_text"), {{"instruction", inst.prompt}, {"rationale", masked.text}});
    } else {
        std::string code;
        if (solution) {
            code = *solution;
        } else {
            const auto ask = render(t.get("rationale_to_code"), {{"instruction", inst.prompt}, {"rationale", *gt.rationale}});
            code = joined_code(client.complete({{"user", ask}}, params).front());
        }
        if (code.empty()) {
            reason = "rationale translation produced no code";
            return std::nullopt;
        }
        const bool modular = rng.uniform(2) == 1;
        schema = modular ? ReasoningSchema::ModularProgramming : ReasoningSchema::ChainOfThought;
        prompt = render(t.get(modular ? "elicit_math_tool_modular" : "elicit_math_tool"),
                        {{"instruction", inst.prompt}, {"code", code}});
    }

    auto messages = engine_.actor_messages(inst, history, schema);
    messages.push_back({"user", prompt});
    auto body = client.complete(messages, params).front();
    auto node = engine_.make_action(inst, history, std::move(body), schema, client.model());
    node.origin = NodeOrigin::GroundTruthElicited;

    auto screened = screen(inst, {node});
    if (screened.empty()) {
        reason = "elicited code failed the syntax check";
        return std::nullopt;
    }
    if (!screened.front().node.correct) {
        reason = "elicited action is incorrect: " + screened.front().verdict.detail;
        return std::nullopt;
    }
    return std::move(screened.front());
}

ElicitResult Sampler::elicit_with_ground_truth(const Instruction& inst, const std::vector<ActionNode>& history,
                                               ModelClient& client, Rng& rng, const std::string* solution) const {
    ElicitResult result;
    const auto& gt = inst.ground_truth;
    const bool annotated = [&] {
        if (requires_judge(inst)) return false;
        if (inst.task == Task::Coding) return solution != nullptr || !gt.solutions.empty();
        return gt.rationale.has_value() || (solution != nullptr);
    }();
    if (!annotated) {
        result.reason = "no annotation";
        return result;
    }
    if (inst.task == Task::Coding && !solution) solution = &gt.solutions.front();

    // One retry when the elicited action still fails evaluation.
    for (int attempt = 0; attempt < 2; ++attempt) {
        ++result.attempts;
        result.action = elicit_once(inst, history, client, rng, solution, result.reason);
        if (result.action) {
            result.reason.clear();
            break;
        }
    }
    return result;
}

std::optional<Candidate> Sampler::sample_incorrect(const Instruction& inst, const std::vector<ActionNode>& history,
                                                   Rng& rng) const {
    auto& model = *pool_[rng.uniform(pool_.size())];
    std::vector<ReasoningSchema> schemas(static_cast<std::size_t>(engine_.config().budget.samples_per_round));
    for (auto& s : schemas) s = sample_schema(rng);
    auto actions = engine_.run_actions(inst, history, model, schemas);
    for (auto& a : actions) {
        auto screened = screen(inst, {std::move(a)});
        if (!screened.empty() && !screened.front().node.correct) return std::move(screened.front());
    }
    return std::nullopt;
}

std::vector<std::pair<Candidate, Candidate>> Sampler::extra_pairs_for_hard(const Instruction& inst,
                                                                          const std::vector<ActionNode>& history,
                                                                          Rng& rng) const {
    std::vector<std::pair<Candidate, Candidate>> out;
    const auto& solutions = inst.ground_truth.solutions;
    if (solutions.size() < 2) return out;
    for (const auto& solution : solutions) {
        auto correct = elicit_with_ground_truth(inst, history, elicitor(), rng, &solution);
        if (!correct.action) continue;
        auto incorrect = sample_incorrect(inst, history, rng);
        if (!incorrect) continue;
        correct.action->node.origin = NodeOrigin::Additional;
        incorrect->node.origin = NodeOrigin::Additional;
        out.emplace_back(std::move(*correct.action), std::move(*incorrect));
    }
    return out;
}

}  // namespace preftree
