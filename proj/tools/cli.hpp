#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fractoid::cli {

enum ExitCode : int { pass = 0, check_failure = 1, config_error = 2, runtime_error = 3 };

/// Runs `fractoid <args...>` (args exclude the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fractoid::cli
