#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace netprint::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsageOrFormat = 2,
    kInternal = 3,
};

/// Runs the `netprint` command line. `args` excludes the program name.
/// Data goes to files; diagnostics and progress go to `err`, help to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace netprint::cli
