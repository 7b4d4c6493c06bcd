#include "preftree/prompts.hpp"

#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

#include "preftree/errors.hpp"

namespace preftree {

// Generated from prompts/<version>/*.txt.
const std::vector<std::pair<const char*, const char*>>& embedded_prompts();
const char* embedded_prompts_version();

namespace {

// Template files end with a newline that is not part of the prompt.
std::string trim_final_newline(std::string s) {
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

}  // namespace

PromptTemplates PromptTemplates::builtin() {
    PromptTemplates t;
    t.version_ = embedded_prompts_version();
    for (const auto& [name, text] : embedded_prompts()) t.templates_.emplace(name, trim_final_newline(text));
    return t;
}

PromptTemplates PromptTemplates::with_overrides(const std::filesystem::path& dir) {
    auto t = builtin();
    if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        t.templates_[entry.path().stem().string()] = trim_final_newline(ss.str());
    }
    t.version_ += "+" + dir.filename().string();
    return t;
}

const std::string& PromptTemplates::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("no prompt template named " + std::string(name));
    return it->second;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = slots.find(std::string(tmpl.substr(i + 1, close - i - 1)));
                if (it != slots.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

}  // namespace preftree
