#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace freqtune::cli
{

enum ExitCode : int
{
    kOk = 0,
    kConfigError = 1,
    kRuntimeError = 2,
};

/// Entry point of the `freqtune` tool. `args` excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace freqtune::cli
