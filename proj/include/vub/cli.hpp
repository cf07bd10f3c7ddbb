#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vub::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,  // runtime or validation failure
  kUsage = 2,    // bad arguments, bad config, malformed input files
};

/// Runs `vubctl` with args (excluding the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a flat `key=value` config file (blank lines and `#` comments
/// ignored) into `--key value` argument pairs.
std::vector<std::string> config_to_args(const std::string& path);

}  // namespace vub::cli
