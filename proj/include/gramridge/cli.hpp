#pragma once

#include <string>
#include <vector>

namespace gramridge {

// Entry point behind the command-line binary; exposed so tests can drive the
// exact command surface in-process. Exit codes: 0 success, 2 configuration
// error, 3 numerical failure.
int run_command(const std::vector<std::string>& args);
int run_command(int argc, char** argv);

}  // namespace gramridge
