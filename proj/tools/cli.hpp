#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace barn::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kUsage = 2,    // bad or unknown flags, invalid settings
    kData = 3,     // unreadable or malformed data/model files
    kNumeric = 4,  // training or sampling failed numerically
};

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace barn::cli
