#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pprm::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;  // also: monitor finished without an alarm
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAlarm = 10;

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Same as run(), with args excluding the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pprm::cli
