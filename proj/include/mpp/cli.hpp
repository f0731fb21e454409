#pragma once

#include <iosfwd>

namespace mpp {

/// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitScenarioFailure = 1;
inline constexpr int kExitConfigError = 2;

/// Subcommands: simulate, montecarlo, plan. Returns one of the exit codes
/// above; usage and diagnostics go to `err`, summaries to `out`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mpp
