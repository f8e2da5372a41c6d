#pragma once

#include <iosfwd>

namespace transduct::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point of the `transduct` tool; subcommands solve, pseudo-label,
/// ensemble and bench. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace transduct::cli
