#pragma once

#include <ostream>

namespace kbl::cli {

/// Exit codes: 0 success, 1 failed assertion or numerical failure, 2 usage
/// or configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace kbl::cli
