#pragma once

// Named prompt templates with {slot} placeholders. The built-in set is the
// prompts/v1 directory embedded at build time; a directory of .txt files can
// override any template by name.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace preftree {

class PromptTemplates {
public:
    static PromptTemplates builtin();
    // Built-in set with every <name>.txt in dir replacing the template of that name.
    static PromptTemplates with_overrides(const std::filesystem::path& dir);

    const std::string& get(std::string_view name) const;
    void set(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }
    const std::string& version() const { return version_; }

private:
    std::map<std::string, std::string, std::less<>> templates_;
    std::string version_;
};

// Replaces {name} for every name in slots; other braces are left alone.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots);

}  // namespace preftree
