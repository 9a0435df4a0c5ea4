#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bprnn::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,       // bad arguments or configuration
  kDiverged = 2,    // DNC during training, failed initialization
  kIo = 3,          // unreadable input, bad checkpoint, unknown symbol
};

// Runs one command line (args excludes the program name). Results go to
// `out`, a single-line "error: <kind>: <reason>" goes to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bprnn::cli
