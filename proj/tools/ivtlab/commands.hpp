#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ivtlab {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kAssertionFailure = 2,
  kPartialRun = 3,
};

// Entry point shared by main() and the tests. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ivtlab
