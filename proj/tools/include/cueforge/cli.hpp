#pragma once

#include <string>
#include <vector>

namespace cueforge::cli {

/// Runs the cueforge command line. Returns 0 on success, 1 for invalid input
/// or parameters, 2 for filesystem failures. Diagnostics go to stderr.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace cueforge::cli
