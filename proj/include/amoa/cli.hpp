#pragma once

#include <ostream>

namespace amoa {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitRunFailure = 2,
  kExitPartialFailure = 3,
};

/// Entry point of the `amoa` command; writes only to the given streams.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace amoa
