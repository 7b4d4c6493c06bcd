#include "preftree/tree_io.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "preftree/errors.hpp"

namespace preftree {

using nlohmann::json;

namespace {

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

}  // namespace

json to_json(const TestCase& tc) {
    return json{{"input", tc.input}, {"expected_output", tc.expected_output}, {"category", to_string(tc.category)}};
}

json to_json(const Instruction& inst) {
    json tests = json::array();
    for (const auto& tc : inst.ground_truth.test_cases) tests.push_back(to_json(tc));
    return json{
        {"id", inst.id},
        {"dataset", inst.dataset},
        {"task", to_string(inst.task)},
        {"tool_mode", inst.tool_mode},
        {"prompt", inst.prompt},
        {"ground_truth",
         {{"answer", opt(inst.ground_truth.answer)},
          {"rationale", opt(inst.ground_truth.rationale)},
          {"solutions", inst.ground_truth.solutions},
          {"test_cases", tests}}},
        {"metadata", inst.metadata},
    };
}

json to_json(const Observation& obs) {
    return json{{"exec_output", opt(obs.exec_output)},
                {"traceback", opt(obs.traceback)},
                {"binary_feedback", obs.binary_feedback},
                {"timed_out", obs.timed_out}};
}

json to_json(const ActionNode& n) {
    json j{
        {"id", n.id},
        {"parent_id", opt(n.parent_id)},
        {"turn", n.turn},
        {"content_kind", to_string(n.content_kind)},
        {"body", n.body},
        {"schema", to_string(n.schema)},
        {"producer", n.producer},
        {"correct", n.correct},
        {"origin", to_string(n.origin)},
        {"observation", n.observation ? to_json(*n.observation) : json(nullptr)},
        {"critique", n.critique ? json{{"text", n.critique->text}, {"author", n.critique->author}} : json(nullptr)},
    };
    return j;
}

json to_json(const PreferenceTree& tree) {
    json nodes = json::array();
    for (const auto& [_, n] : tree.nodes) nodes.push_back(to_json(n));
    json extra = json::array();
    for (const auto& p : tree.extra_pairs) extra.push_back(json{{"chosen", p.chosen}, {"rejected", p.rejected}});
    return json{{"instruction", to_json(tree.instruction)},
                {"max_depth", tree.max_depth},
                {"nodes", nodes},
                {"extra_pairs", extra}};
}

TestCase test_case_from_json(const json& j) {
    TestCase tc;
    tc.input = j.at("input").get<std::string>();
    tc.expected_output = j.at("expected_output").get<std::string>();
    if (auto it = j.find("category"); it != j.end() && !it->is_null()) {
        tc.category = parse_test_category(it->get<std::string>());
    }
    return tc;
}

Instruction instruction_from_json(const json& j) {
    Instruction inst;
    inst.id = j.at("id").get<std::string>();
    inst.dataset = j.value("dataset", std::string{});
    inst.task = parse_task(j.at("task").get<std::string>());
    inst.tool_mode = j.value("tool_mode", false);
    inst.prompt = j.at("prompt").get<std::string>();
    if (auto gt = j.find("ground_truth"); gt != j.end() && !gt->is_null()) {
        inst.ground_truth.answer = opt_string(*gt, "answer");
        inst.ground_truth.rationale = opt_string(*gt, "rationale");
        if (auto s = gt->find("solutions"); s != gt->end() && !s->is_null()) {
            inst.ground_truth.solutions = s->get<std::vector<std::string>>();
        }
        if (auto t = gt->find("test_cases"); t != gt->end() && !t->is_null()) {
            for (const auto& tc : *t) inst.ground_truth.test_cases.push_back(test_case_from_json(tc));
        }
    }
    if (auto m = j.find("metadata"); m != j.end() && !m->is_null()) {
        for (const auto& [k, v] : m->items()) {
            inst.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
    }
    return inst;
}

ActionNode node_from_json(const json& j) {
    ActionNode n;
    n.id = j.at("id").get<std::string>();
    n.parent_id = opt_string(j, "parent_id");
    n.turn = j.at("turn").get<int>();
    n.content_kind = parse_content_kind(j.at("content_kind").get<std::string>());
    n.body = j.at("body").get<std::string>();
    n.schema = parse_schema(j.at("schema").get<std::string>());
    n.producer = j.value("producer", std::string{});
    n.correct = j.at("correct").get<bool>();
    if (auto o = j.find("origin"); o != j.end() && !o->is_null()) n.origin = parse_node_origin(o->get<std::string>());
    if (auto o = j.find("observation"); o != j.end() && !o->is_null()) {
        Observation obs;
        obs.exec_output = opt_string(*o, "exec_output");
        obs.traceback = opt_string(*o, "traceback");
        obs.binary_feedback = o->at("binary_feedback").get<bool>();
        obs.timed_out = o->value("timed_out", false);
        n.observation = std::move(obs);
    }
    if (auto c = j.find("critique"); c != j.end() && !c->is_null()) {
        n.critique = Critique{c->at("text").get<std::string>(), c->value("author", std::string{})};
    }
    return n;
}

PreferenceTree tree_from_json(const json& j) {
    PreferenceTree tree;
    tree.instruction = instruction_from_json(j.at("instruction"));
    tree.max_depth = j.value("max_depth", kMaxTurns);
    for (const auto& jn : j.at("nodes")) {
        auto n = node_from_json(jn);
        auto id = n.id;
        if (!tree.nodes.emplace(id, std::move(n)).second) {
            throw std::invalid_argument("duplicate node id " + id);
        }
    }
    if (auto e = j.find("extra_pairs"); e != j.end() && !e->is_null()) {
        for (const auto& p : *e) {
            tree.extra_pairs.push_back({p.at("chosen").get<std::string>(), p.at("rejected").get<std::string>()});
        }
    }
    return tree;
}

void save_trees(const std::vector<PreferenceTree>& trees, std::ostream& sink) {
    for (const auto& t : trees) sink << to_json(t).dump() << '\n';
}

std::vector<PreferenceTree> load_trees(std::istream& source) {
    std::vector<PreferenceTree> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(source, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        PreferenceTree tree;
        try {
            tree = tree_from_json(json::parse(line));
        } catch (const std::exception& e) {
            throw ParseError(lineno, e.what());
        }
        auto violations = validate_tree(tree);
        if (!violations.empty()) throw ValidationError(std::move(violations), lineno);
        out.push_back(std::move(tree));
    }
    return out;
}

void save_instructions(const std::vector<Instruction>& instructions, std::ostream& sink) {
    for (const auto& i : instructions) sink << to_json(i).dump() << '\n';
}

}  // namespace preftree
