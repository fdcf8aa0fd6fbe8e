#pragma once

#include <string>
#include <vector>

namespace mixim::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Full command-line entry point; args exclude the program name.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace mixim::cli
