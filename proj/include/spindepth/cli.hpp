#pragma once

#include <iosfwd>

namespace spindepth {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitInapplicable = 4;

/// The spindepth command line. Results go to `out` (or the --output file),
/// diagnostics to `err`. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spindepth
