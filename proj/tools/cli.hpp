#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qiv::cli {

/// Runs the command line `args` (without the program name) and returns the
/// process exit code: 0 success, 2 validation error, 3 numerical failure,
/// 4 I/O failure. Errors are reported on `err` as one JSON object per line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qiv::cli
