// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_TOOLS_CLI_HPP
#define CAM_TOOLS_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace cam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitVerification = 4;

/// Entry point of the `cam` tool; `args` excludes the program name.
/// Subcommands: simulate, fit, summarize, verify-prior.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cam::cli

#endif  // CAM_TOOLS_CLI_HPP
