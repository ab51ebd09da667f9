#pragma once

#include <iosfwd>

namespace gxe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Parses the command line and runs one subcommand. Human-readable output
/// goes to `out`, diagnostics to `err`; interactive prompts read `in`.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace gxe::cli
