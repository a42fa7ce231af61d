#pragma once

// The command-line front end: gen-data, train, enhance, evaluate, check.
// Everything is deterministic given the config file and seed; command-line
// flags override config values, which override the built-in defaults.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
// numeric failure, 3 check-suite failure.

#include <string>
#include <vector>

namespace tmgan {

int run_cli(int argc, char** argv);

// Test-friendly overload: arguments without the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace tmgan
