// Command-line front end. Exit codes: 0 success or all checks pass; 1 a
// calibration check failed or the bench cannot present its stimulus; 2 bad
// flags or configuration; 3 solver non-convergence; 4 internal error.

#pragma once

#include <string>
#include <vector>

namespace haplo {

/// Runs one command; args exclude the program name. Returns the exit code.
int run(const std::vector<std::string>& args);

}  // namespace haplo
