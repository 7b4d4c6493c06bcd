#include "preftree/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace preftree {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

struct Span {
    std::size_t begin;
    std::size_t end;
};

// Numeric tokens: [-]d+(,ddd)*(.d+)?(/[-]d+(.d+)?)?
std::vector<Span> scan_numbers(std::string_view s) {
    std::vector<Span> out;
    std::size_t i = 0;
    const std::size_t n = s.size();
    auto digits = [&](std::size_t j) {
        while (j < n && is_digit(s[j])) ++j;
        return j;
    };
    while (i < n) {
        std::size_t start = i;
        bool neg = false;
        if (s[i] == '-' && i + 1 < n && is_digit(s[i + 1]) && (i == 0 || (!is_word(s[i - 1]) && s[i - 1] != '.'))) {
            neg = true;
        } else if (!is_digit(s[i]) || (i > 0 && (is_digit(s[i - 1]) || s[i - 1] == '.'))) {
            ++i;
            continue;
        }
        std::size_t j = digits(start + (neg ? 1 : 0));
        while (j + 3 < n && s[j] == ',' && is_digit(s[j + 1]) && is_digit(s[j + 2]) && is_digit(s[j + 3]) &&
               (j + 4 >= n || !is_digit(s[j + 4]))) {
            j += 4;
        }
        if (j + 1 < n && s[j] == '.' && is_digit(s[j + 1])) j = digits(j + 1);
        if (j + 1 < n && s[j] == '/') {
            std::size_t k = j + 1;
            if (k < n && s[k] == '-') ++k;
            if (k < n && is_digit(s[k])) {
                k = digits(k);
                if (k + 1 < n && s[k] == '.' && is_digit(s[k + 1])) k = digits(k + 1);
                j = k;
            }
        }
        out.push_back({start, j});
        i = j;
    }
    return out;
}

std::optional<double> to_double(std::string_view s) {
    std::string cleaned;
    for (char c : s) {
        if (c != ',') cleaned.push_back(c);
    }
    if (cleaned.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), v);
    if (ec != std::errc() || ptr != cleaned.data() + cleaned.size()) return std::nullopt;
    return v;
}

std::string normalize_words(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            pending_space = true;
        }
    }
    return out;
}

std::optional<std::string> last_tag(std::string_view body, std::string_view open, std::string_view close) {
    auto pos = body.rfind(open);
    if (pos == std::string_view::npos) return std::nullopt;
    auto start = pos + open.size();
    auto end = body.find(close, start);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(body.substr(start, end - start));
}

std::optional<std::string> last_boxed(std::string_view body) {
    auto pos = body.rfind("\\boxed{");
    if (pos == std::string_view::npos) return std::nullopt;
    std::size_t i = pos + 7;
    int depth = 1;
    std::size_t start = i;
    for (; i < body.size(); ++i) {
        if (body[i] == '{') ++depth;
        if (body[i] == '}' && --depth == 0) return std::string(body.substr(start, i - start));
    }
    return std::nullopt;
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> extract_code_blocks(std::string_view body) {
    struct Block {
        std::size_t at;
        std::string code;
    };
    std::vector<Block> blocks;

    std::size_t pos = 0;
    while ((pos = body.find("```", pos)) != std::string_view::npos) {
        auto line_end = body.find('\n', pos);
        if (line_end == std::string_view::npos) break;
        auto close = body.find("```", line_end + 1);
        if (close == std::string_view::npos) break;
        blocks.push_back({pos, std::string(body.substr(line_end + 1, close - line_end - 1))});
        pos = close + 3;
    }
    pos = 0;
    constexpr std::string_view open = "<execute>";
    constexpr std::string_view close = "</execute>";
    while ((pos = body.find(open, pos)) != std::string_view::npos) {
        auto end = body.find(close, pos + open.size());
        if (end == std::string_view::npos) break;
        blocks.push_back({pos, trim(body.substr(pos + open.size(), end - pos - open.size())) + "\n"});
        pos = end + close.size();
    }
    std::stable_sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) { return a.at < b.at; });
    std::vector<std::string> out;
    for (auto& b : blocks) out.push_back(std::move(b.code));
    return out;
}

std::string joined_code(std::string_view body) {
    std::string out;
    for (const auto& b : extract_code_blocks(body)) {
        out += b;
        if (!out.empty() && out.back() != '\n') out.push_back('\n');
    }
    return out;
}

std::string strip_code_blocks(std::string_view body) {
    std::string rest(body);
    for (;;) {
        auto a = rest.find("```");
        if (a == std::string::npos) break;
        auto b = rest.find("```", a + 3);
        if (b == std::string::npos) break;
        rest.erase(a, b + 3 - a);
    }
    for (;;) {
        auto a = rest.find("<execute>");
        if (a == std::string::npos) break;
        auto b = rest.find("</execute>", a);
        if (b == std::string::npos) break;
        rest.erase(a, b + 10 - a);
    }
    return rest;
}

ContentKind classify_content(std::string_view body) {
    if (extract_code_blocks(body).empty()) return ContentKind::Text;
    return trim(strip_code_blocks(body)).empty() ? ContentKind::Code : ContentKind::Mixed;
}

std::vector<std::string> normalize_output(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        std::size_t e = line.size();
        while (e > 0 && is_space(line[e - 1])) --e;
        lines.emplace_back(line.substr(0, e));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

bool outputs_match(std::string_view actual, std::string_view expected) {
    return normalize_output(actual) == normalize_output(expected);
}

std::size_t StepMarker::last_mark_end(std::string_view body) const {
    std::size_t result = 0;
    std::size_t line_start = 0;
    while (line_start < body.size()) {
        auto nl = body.find('\n', line_start);
        auto line = body.substr(line_start, nl == std::string_view::npos ? std::string_view::npos : nl - line_start);
        std::size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '#' || line[i] == '*')) ++i;
        if (line.substr(i, label.size()) == label) {
            std::size_t j = i + label.size();
            while (j < line.size() && line[j] == ' ') ++j;
            std::size_t d = j;
            while (j < line.size() && is_digit(line[j])) ++j;
            if (j > d && j < line.size() && (line[j] == ':' || line[j] == '.')) result = line_start + j + 1;
        }
        if (nl == std::string_view::npos) break;
        line_start = nl + 1;
    }
    return result;
}

std::size_t StepMarker::count(std::string_view body) const {
    std::size_t n = 0;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto nl = body.find('\n', pos);
        auto line = body.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (last_mark_end(line) > 0) ++n;
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return n;
}

std::optional<double> parse_number(std::string_view raw) {
    std::string s = trim(raw);
    while (!s.empty() && (s.front() == '$' || s.front() == '+')) s.erase(s.begin());
    while (!s.empty() && (s.back() == '.' || s.back() == '%' || s.back() == '$')) s.pop_back();
    s = trim(s);
    if (s.empty()) return std::nullopt;

    if (s.rfind("\\frac{", 0) == 0 || s.rfind("-\\frac{", 0) == 0) {
        const bool neg = s[0] == '-';
        auto a0 = s.find('{');
        auto a1 = s.find('}', a0);
        auto b0 = s.find('{', a1);
        auto b1 = s.find('}', b0 == std::string::npos ? a1 : b0);
        if (a1 == std::string::npos || b0 == std::string::npos || b1 == std::string::npos || b1 + 1 != s.size()) {
            return std::nullopt;
        }
        auto num = parse_number(s.substr(a0 + 1, a1 - a0 - 1));
        auto den = parse_number(s.substr(b0 + 1, b1 - b0 - 1));
        if (!num || !den || *den == 0) return std::nullopt;
        return (neg ? -1.0 : 1.0) * *num / *den;
    }
    if (auto slash = s.find('/'); slash != std::string::npos) {
        auto num = to_double(trim(s.substr(0, slash)));
        auto den = to_double(trim(s.substr(slash + 1)));
        if (!num || !den || *den == 0) return std::nullopt;
        return *num / *den;
    }
    return to_double(s);
}

std::vector<std::pair<std::size_t, std::size_t>> numeric_token_spans(std::string_view s) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (auto sp : scan_numbers(s)) out.emplace_back(sp.begin, sp.end);
    return out;
}

std::vector<std::string> numeric_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (auto sp : scan_numbers(s)) out.emplace_back(s.substr(sp.begin, sp.end - sp.begin));
    return out;
}

std::optional<std::string> extract_final_answer(std::string_view body, const StepMarker& marker, bool numeric) {
    std::optional<std::string> span = last_tag(body, "<solution>", "</solution>");
    if (!span) span = last_boxed(body);
    if (span) {
        if (!numeric) return trim(*span);
        if (parse_number(*span)) return trim(*span);
        auto toks = numeric_tokens(*span);
        if (!toks.empty()) return toks.back();
        return trim(*span);
    }
    const auto region = strip_code_blocks(body.substr(marker.last_mark_end(body)));
    if (numeric) {
        auto toks = numeric_tokens(region);
        if (toks.empty()) return std::nullopt;
        return toks.back();
    }
    auto lowered = to_lower(region);
    for (std::string_view cue : {"answer is", "answer:"}) {
        auto p = lowered.rfind(cue);
        if (p != std::string::npos) {
            auto rest = trim(region.substr(p + cue.size()));
            auto nl = rest.find('\n');
            return trim(rest.substr(0, nl));
        }
    }
    auto lines = normalize_output(region);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (!trim(*it).empty()) return trim(*it);
    }
    return std::nullopt;
}

bool answers_match(std::string_view predicted, std::string_view gold) {
    const std::string p = trim(predicted);
    const std::string g = trim(gold);
    if (p == g) return true;
    auto a = parse_number(p);
    auto b = parse_number(g);
    if (a && b) return std::fabs(*a - *b) <= std::max(1e-6, 1e-6 * std::fabs(*b));
    if (a || b) return false;
    auto np = normalize_words(p);
    return !np.empty() && np == normalize_words(g);
}

}  // namespace preftree
