#pragma once

#include <string>
#include <vector>

namespace dcereg {

/// Exit codes shared by every subcommand.
enum ExitCode : int { exit_ok = 0, exit_input_error = 2, exit_registration_failure = 3 };

/// Entry point of the `dcereg` command line (phantom, register, evaluate, subtract, compare).
int run_cli(const std::vector<std::string> &args);
int run_cli(int argc, char **argv);

}  // namespace dcereg
