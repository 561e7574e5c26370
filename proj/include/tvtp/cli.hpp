#pragma once

// Command-line front end: simulate, fit, mc, mixing-check.
//
// Exit codes: 0 success, 2 input or validation error, 3 numerical failure
// (non-convergence, failed mixing check), 4 internal error.

#include <iosfwd>

namespace tvtp {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNumeric = 3, kExitInternal = 4 };

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tvtp
