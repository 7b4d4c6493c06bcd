#pragma once

// Text helpers shared by the evaluator and the sampling code: code-block
// extraction, program-output normalization and final-answer matching.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "preftree/tree.hpp"

namespace preftree {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Fenced ``` blocks (any info string) and <execute>...</execute> spans, in order.
std::vector<std::string> extract_code_blocks(std::string_view body);

// Joins all code blocks into one program.
std::string joined_code(std::string_view body);

// Body with fenced and tagged code regions removed.
std::string strip_code_blocks(std::string_view body);

ContentKind classify_content(std::string_view body);

// Trailing whitespace stripped per line, trailing blank lines dropped.
std::vector<std::string> normalize_output(std::string_view text);
bool outputs_match(std::string_view actual, std::string_view expected);

// Step marks look like "Step 3:" at line start; the word is configurable.
struct StepMarker {
    std::string label = "Step";

    // Byte offset just past the last step mark, or 0 when there is none.
    std::size_t last_mark_end(std::string_view body) const;
    std::size_t count(std::string_view body) const;
};

// Accepts integers, decimals, thousands separators, a/b fractions,
// \frac{a}{b}, and a trailing '%' (kept as the literal value).
std::optional<double> parse_number(std::string_view s);

// [begin, end) byte spans of numeric or fraction tokens, in order.
std::vector<std::pair<std::size_t, std::size_t>> numeric_token_spans(std::string_view s);

// Every numeric or fraction token in order, as written.
std::vector<std::string> numeric_tokens(std::string_view s);

// Final answer span: last <solution> tag, else last \boxed{}, else the text
// after the final step mark (its last numeric token when numeric is set).
std::optional<std::string> extract_final_answer(std::string_view body, const StepMarker& marker, bool numeric);

// Exact string match, or |a-b| <= max(1e-6, 1e-6*|b|) when both parse as
// numbers, or equality after case/punctuation normalization.
bool answers_match(std::string_view predicted, std::string_view gold);

}  // namespace preftree
