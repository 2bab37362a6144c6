#pragma once

#include <iosfwd>

namespace relight::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

/// Runs one `relight` command line. Never throws; errors map to ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relight::cli
