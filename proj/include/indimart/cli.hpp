#pragma once

#include <string>
#include <vector>

namespace indimart {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitPrecondition = 3;

// Entry point of the `indimart` tool: subcommands generate, decompose, verify.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace indimart
