#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmaccel::cli {

enum ExitCode { kOk = 0, kValidation = 1, kFailedVerdict = 2 };

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dmaccel::cli
