#pragma once

#include <iosfwd>

#include "animforge/config.hpp"

namespace animforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kWorkspaceEnv = "ANIMFORGE_WORKSPACE";

// Subcommands: run, resume, inspect, eval, providers-check. Machine-readable
// output (paths, JSON) goes to `out`; progress and diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

}  // namespace animforge::cli
