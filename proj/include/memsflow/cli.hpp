#pragma once

// Command-line front end: simulate, oracle, sweep, validate.

#include <iosfwd>
#include <string>
#include <vector>

namespace memsflow {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

std::string version();

int run_cli(int argc, char** argv);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace memsflow
