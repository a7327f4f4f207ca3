#pragma once

// The `stackelq` command-line front end, callable in-process so tests can
// drive it without spawning a shell.

#include <iosfwd>
#include <string>
#include <vector>

#include "stackelq/error.hpp"

namespace stackelq::cli {

// Stable exit-code contract for scripting.
enum ExitCode : int {
  kOk = 0,
  kNotStabilizable = 2,
  kInvalidInput = 3,
  kNumericalFailure = 4,
  kVerificationFailure = 5,
};

int exit_code_for(ErrorCode code);

// argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stackelq::cli
