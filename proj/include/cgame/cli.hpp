#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cgame {

/// Exit codes of cli_run.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name).
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cgame
