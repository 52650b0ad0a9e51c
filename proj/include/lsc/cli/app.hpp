#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lsc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand; `args` excludes the program name. Returns the exit
/// code: 0 success, 1 runtime failure, 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace lsc::cli
