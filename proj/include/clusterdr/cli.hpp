#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clusterdr {

// Exit codes of the command-line front end.
constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitEstimation = 2;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clusterdr
