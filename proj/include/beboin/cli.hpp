#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace beboin {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;  // the design rules reject the input
inline constexpr int kExitUsage = 2;   // bad flags or invalid configuration

// Runs the command-line tool. `args` excludes the program name. Results go to
// `out` (or to --out); the resolved config and diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace beboin
