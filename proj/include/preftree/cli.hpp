#pragma once

// Command-line entry point: select, build, export, decontam, losslab, rerank, stats.
// Exit codes: 0 success, 1 partial failure (or contamination found), 2 usage
// or configuration error.

#include <iosfwd>
#include <string>
#include <vector>

namespace preftree {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name. '-' paths read from in / write to out.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace preftree
