#pragma once

#include <string>
#include <vector>

namespace nftidx::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,      // bad arguments or invalid input data
    kNumerical = 3,  // degenerate design, failed regression
    kIo = 4,
};

/// Runs one command line; args[0] is the program name. Errors are reported
/// on stderr and mapped to ExitCode.
int run(const std::vector<std::string>& args);

}  // namespace nftidx::cli
