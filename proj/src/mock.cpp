#include "preftree/mock.hpp"

#include <map>

#include "preftree/hash.hpp"
#include "preftree/rng.hpp"
#include "preftree/text.hpp"

namespace preftree {

namespace {

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find('\n', start);
        if (end == std::string_view::npos) end = s.size();
        out.emplace_back(s.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::string traceback(int line, const std::string& error) {
    return "Traceback (most recent call last):\n  File \"<string>\", line " + std::to_string(line) +
           ", in <module>\n" + error;
}

std::optional<std::string> syntax_error(const std::string& code) {
    const auto lines = split_lines(code);
    std::vector<char> stack;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = trim(lines[i]);
        const int lineno = static_cast<int>(i) + 1;
        auto fail = [&] { return "SyntaxError: invalid syntax (line " + std::to_string(lineno) + ")"; };
        if (line.find("(:") != std::string::npos) return fail();
        for (const char* kw : {"def ", "if ", "for ", "while ", "class ", "elif "}) {
            if (starts_with(line, kw) && line.back() != ':' && line.find(": ") == std::string::npos) return fail();
        }
        char quote = 0;
        for (char c : line) {
            if (quote) {
                if (c == quote) quote = 0;
                continue;
            }
            if (c == '#') break;
            if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '(' || c == '[' || c == '{') {
                stack.push_back(c);
            } else if (c == ')' || c == ']' || c == '}') {
                const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
                if (stack.empty() || stack.back() != open) return fail();
                stack.pop_back();
            }
        }
        if (quote) return fail();
    }
    if (!stack.empty()) return "SyntaxError: unexpected EOF while parsing";
    return std::nullopt;
}

std::string literal_text(const std::string& expr) {
    const auto e = trim(expr);
    if (e.size() >= 2 && (e.front() == '"' || e.front() == '\'') && e.back() == e.front()) {
        return e.substr(1, e.size() - 2);
    }
    return e;
}

}  // namespace

ExecResponse toy_execute(const ExecRequest& req) {
    ExecResponse resp;
    resp.id = req.id;
    const auto err = syntax_error(req.code);
    if (req.kind == ExecKind::SyntaxCheck) {
        resp.syntax_ok = !err.has_value();
        if (err) resp.stderr_text = *err;
        return resp;
    }
    if (err) {
        resp.traceback = *err;
        resp.stderr_text = *err;
        resp.exit_status = 1;
        return resp;
    }

    const auto stdin_lines = split_lines(req.stdin_text);
    std::size_t next_input = 0;
    bool stdin_drained = false;
    const auto lines = split_lines(req.code);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = trim(lines[i]);
        const int lineno = static_cast<int>(i) + 1;
        if (line.empty() || line.front() == '#') continue;
        if (starts_with(line, "while True")) {
            resp.timed_out = true;
            resp.exit_status = -9;
            resp.duration_ms = req.timeout_ms;
            return resp;
        }
        if (starts_with(line, "raise ")) {
            auto name = trim(line.substr(6));
            if (auto p = name.find('('); p != std::string::npos) {
                auto msg = literal_text(name.substr(p + 1, name.rfind(')') - p - 1));
                name = name.substr(0, p) + (msg.empty() ? "" : ": " + msg);
            }
            resp.traceback = traceback(lineno, name);
            resp.stderr_text = *resp.traceback;
            resp.exit_status = 1;
            return resp;
        }
        if (line.find("1/0") != std::string::npos || line.find("1 / 0") != std::string::npos) {
            resp.traceback = traceback(lineno, "ZeroDivisionError: division by zero");
            resp.stderr_text = *resp.traceback;
            resp.exit_status = 1;
            return resp;
        }
        if (starts_with(line, "exit(") || starts_with(line, "sys.exit(")) {
            const auto arg = line.substr(line.find('(') + 1, line.rfind(')') - line.find('(') - 1);
            resp.exit_status = arg.empty() ? 0 : std::stoi(arg);
            return resp;
        }
        if (line == "print(input())") {
            if (stdin_drained || next_input >= stdin_lines.size() ||
                (next_input + 1 == stdin_lines.size() && stdin_lines.back().empty())) {
                resp.traceback = traceback(lineno, "EOFError: EOF when reading a line");
                resp.stderr_text = *resp.traceback;
                resp.exit_status = 1;
                return resp;
            }
            resp.stdout_text += stdin_lines[next_input++] + "\n";
            continue;
        }
        if (line == "print(sys.stdin.read())") {
            std::string rest;
            for (std::size_t k = next_input; k < stdin_lines.size(); ++k) {
                rest += stdin_lines[k];
                if (k + 1 < stdin_lines.size()) rest += "\n";
            }
            next_input = stdin_lines.size();
            stdin_drained = true;
            resp.stdout_text += rest + "\n";
            continue;
        }
        if (starts_with(line, "print(") && line.back() == ')') {
            resp.stdout_text += literal_text(line.substr(6, line.size() - 7)) + "\n";
        }
    }
    return resp;
}

SandboxPtr make_toy_sandbox() { return std::make_shared<StubSandbox>(toy_execute); }

PromptKind classify_prompt(const std::vector<ChatMessage>& messages, const PromptTemplates& t) {
    if (messages.empty()) return PromptKind::Unknown;
    const auto& text = messages.back().content;
    const std::pair<const char*, PromptKind> table[] = {
        {"critique", PromptKind::Critique},
        {"judge", PromptKind::Judge},
        {"testgen", PromptKind::TestGen},
        {"elicit_coding", PromptKind::ElicitCoding},
        {"elicit_math_text", PromptKind::ElicitMathText},
        {"rationale_to_code", PromptKind::RationaleToCode},
        {"elicit_math_tool_modular", PromptKind::ElicitMathToolModular},
        {"elicit_math_tool", PromptKind::ElicitMathTool},
    };
    // A template is recognised by its fixed text up to the first slot; the
    // longest matching prefix wins.
    PromptKind best = PromptKind::Unknown;
    std::size_t best_len = 0;
    for (const auto& [name, kind] : table) {
        const auto& tmpl = t.get(name);
        const auto prefix = std::string_view(tmpl).substr(0, tmpl.find('{'));
        if (prefix.size() > best_len && std::string_view(text).substr(0, prefix.size()) == prefix) {
            best = kind;
            best_len = prefix.size();
        }
    }
    if (best != PromptKind::Unknown) return best;
    if (messages.front().role == "system") return PromptKind::Actor;
    return PromptKind::Unknown;
}

std::string mock_action_body(const Instruction& inst, bool correct) {
    const auto& gt = inst.ground_truth;
    if (inst.task == Task::Coding) {
        const std::string code = correct ? (gt.solutions.empty() ? "print(input())" : gt.solutions.front())
                                         : "print(\"wrong answer\")";
        return "Step 1: Read the input and compute the result.\n```python\n" + code + "\n```";
    }
    std::string answer = gt.answer.value_or("done");
    if (!correct) {
        if (auto v = parse_number(answer)) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.12g", *v + 1);
            answer = buf;
        } else {
            answer = "not " + answer;
        }
    }
    return "Step 1: Work through the quantities in the problem.\nStep 2: Combine them.\n<solution>" + answer +
           "</solution>";
}

ClientPtr make_mock_client(const MockSpec& spec, std::vector<Instruction> corpus, PromptTemplates templates) {
    auto by_prompt = std::make_shared<std::map<std::string, Instruction>>();
    for (auto& inst : corpus) by_prompt->emplace(inst.prompt, std::move(inst));
    auto lookup = [by_prompt](const std::string& text) -> const Instruction* {
        if (auto it = by_prompt->find(text); it != by_prompt->end()) return &it->second;
        for (const auto& [prompt, inst] : *by_prompt) {
            if (text.find("Problem:\n" + prompt + "\n") != std::string::npos) return &inst;
        }
        return nullptr;
    };

    auto responder = [spec, lookup, templates](const std::vector<ChatMessage>& messages, const SamplingParams& params,
                                               std::uint64_t ordinal) {
        const auto kind = classify_prompt(messages, templates);
        const Instruction* inst = nullptr;
        if (kind == PromptKind::Actor && messages.size() >= 2) {
            inst = lookup(messages[1].content);
        } else {
            inst = lookup(messages.back().content);
        }
        const auto digest = conversation_digest(messages);
        std::vector<std::string> out;
        for (int k = 0; k < params.n; ++k) {
            Rng rng(derive_seed(spec.seed, std::to_string(digest) + ":" + std::to_string(ordinal) + ":" +
                                               std::to_string(k)));
            switch (kind) {
                case PromptKind::Critique:
                    out.push_back("The final step is wrong. Recheck how the quantities combine before answering.");
                    break;
                case PromptKind::Judge:
                    out.push_back(rng.bernoulli(spec.correct_probability) ? "VERDICT: CORRECT\nLooks right."
                                                                          : "VERDICT: INCORRECT\nThe result is off.");
                    break;
                case PromptKind::TestGen:
                    out.push_back(R"({"basic": ["1", "2", "3", "4"], "edge": ["0", "-1", "x", " "],)"
                                  R"( "large": ["1000000", "99999999", "123456789012", "1e18"]})");
                    break;
                case PromptKind::RationaleToCode:
                    out.push_back("```python\nprint(" + (inst && inst->ground_truth.answer ? *inst->ground_truth.answer
                                                                                           : std::string("0")) +
                                  ")\n```");
                    break;
                case PromptKind::ElicitCoding:
                case PromptKind::ElicitMathText:
                case PromptKind::ElicitMathTool:
                case PromptKind::ElicitMathToolModular:
                    out.push_back(inst ? mock_action_body(*inst, true) : "Step 1: no problem found.");
                    break;
                case PromptKind::Actor:
                    out.push_back(inst ? mock_action_body(*inst, rng.bernoulli(spec.correct_probability))
                                       : "Step 1: no problem found.");
                    break;
                case PromptKind::Unknown:
                    out.push_back("I cannot help with that.");
                    break;
            }
        }
        return out;
    };
    return std::make_shared<ScriptedClient>(spec.model, responder);
}

}  // namespace preftree
