#pragma once

#include <iosfwd>

namespace dfir::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailures = 1;
inline constexpr int kExitUsage = 2;

// Entry point shared by the executable and the tests. Settings resolve as
// config file, then DFIR_SEED, then command-line flags, later sources winning.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dfir::tools
