#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace catis::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kIoFailure = 2, kCapacityFailure = 3 };

/// Runs the command line `args` (without the program name). Diagnostics go to
/// `err`, help and summaries to `out`. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace catis::cli
