#ifndef KEYMOTION_TOOLS_COMMANDS_HPP_
#define KEYMOTION_TOOLS_COMMANDS_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace keymotion::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

// Runs one command line (without the program name) and returns the exit status.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace keymotion::cli

#endif  // KEYMOTION_TOOLS_COMMANDS_HPP_
