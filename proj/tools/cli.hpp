#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace catpose::cli {

enum ExitCode : int { kSuccess = 0, kSolverFailure = 1, kInputError = 2 };

/// Runs the command line in-process. Results go to `out`, progress and
/// human-readable diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace catpose::cli
