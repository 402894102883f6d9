#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "asas/error.hpp"

namespace asas::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitAllTrialsFailed = 3;
inline constexpr int kExitCoverageGap = 4;

int exit_code(Errc code);

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace asas::cli
