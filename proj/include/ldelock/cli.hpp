#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ldelock {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitProcedure = 3, kExitIo = 4 };

/// Entry point of the ldelock tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ldelock
