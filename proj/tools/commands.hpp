#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sirenrope::cli {

/// Runs one command line (args[0] is the program name). Returns the process
/// exit code: 0 on success, 1 on runtime failures, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Output root used when --out is absent.
inline constexpr const char* kOutputEnv = "SIRENROPE_OUT";

}  // namespace sirenrope::cli
