#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace teleop {

// Exit codes: 0 ok, 1 runtime failure, 2 usage or configuration error.
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace teleop
