#pragma once

#include <iosfwd>

namespace mfg {

// Exit status: 0 success, 1 validation or usage error, 2 runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfg
