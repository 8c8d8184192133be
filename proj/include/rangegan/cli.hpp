#pragma once

// Command-line front end. Lives in the library so tests can drive it in-process.

#include <ostream>
#include <string>
#include <vector>

namespace rangegan::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kNumeric = 4,
    kConfig = 5,
};

// args excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rangegan::cli
