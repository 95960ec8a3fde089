#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitBackend = 2;

// Entry point for the `rae` tool: build-kg, retrieve, prune, edit, eval,
// dpi-check. `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rae::cli
