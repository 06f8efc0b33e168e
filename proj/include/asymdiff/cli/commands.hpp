#pragma once

#include <iosfwd>

namespace asymdiff::cli {

// Entry point of the `asymdiff` binary. Returns the process exit code:
// 0 ok, 1 usage/config, 2 data, 3 numeric.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace asymdiff::cli
