#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace preftree {

// Malformed input record. line is 1-based, 0 when not line-oriented.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> violations, std::size_t line = 0)
        : std::runtime_error(compose(violations, line)), violations_(std::move(violations)), line_(line) {}
    const std::vector<std::string>& violations() const noexcept { return violations_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string compose(const std::vector<std::string>& v, std::size_t line) {
        std::string s = line ? "line " + std::to_string(line) + ": invalid tree" : "invalid tree";
        for (const auto& m : v) s += "; " + m;
        return s;
    }
    std::vector<std::string> violations_;
    std::size_t line_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace preftree
