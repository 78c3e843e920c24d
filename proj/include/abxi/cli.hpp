#pragma once

#include <string>
#include <vector>

namespace abxi {

// Runs the command line; returns the process exit code (0 ok, 2 config,
// 3 data, 4 numerical, 1 anything else). Never throws.
int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args);  // args exclude argv[0]

}  // namespace abxi
