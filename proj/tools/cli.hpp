#pragma once

#include <string>
#include <vector>

namespace tsccn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Parses argv (argv[0] is the program name) and dispatches one subcommand.
// Errors print a single "error: ..." line on stderr.
int run(const std::vector<std::string>& argv);
int run(int argc, char** argv);

}  // namespace tsccn::cli
