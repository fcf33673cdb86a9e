#pragma once

#include <ostream>

namespace kancql {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // runtime error not covered below
  kExitUsage = 2,    // unknown flag, subcommand or bad value
  kExitIo = 3,       // a file could not be opened, read or written
  kExitFormat = 4,   // a file was readable but malformed
};

// Entry point for the `kancql` tool. Subcommands: gen-data, train, eval,
// count-params, bench. Each prints a table, or JSON with --json.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kancql
