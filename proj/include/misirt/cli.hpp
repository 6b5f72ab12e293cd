#pragma once

// Command-line front end: simulate | fit | compare | recover | diagnose.

#include <iosfwd>
#include <string>
#include <vector>

namespace misirt {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// Runs the CLI on `args` (without the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace misirt
