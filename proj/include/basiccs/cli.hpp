#pragma once

#include <iosfwd>

namespace basiccs {

/// Exit codes: 0 success, 1 runtime or numerical failure, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace basiccs
