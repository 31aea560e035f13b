#ifndef RELPARCEL_CLI_HPP
#define RELPARCEL_CLI_HPP

#include <iosfwd>

namespace relparcel {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitDataOrConfig = 2,
  kExitCheckFailed = 3,  // grad-check tolerance exceeded
};

/// Runs one subcommand: gen-data, train, eval, predict, visualize, grad-check.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relparcel

#endif  // RELPARCEL_CLI_HPP
