#pragma once

#include <iosfwd>

namespace mmtopo {

/// Exit codes: 0 success, 1 usage or config error, 2 solver failure or failed gradient check.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mmtopo
