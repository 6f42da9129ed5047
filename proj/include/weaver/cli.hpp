#pragma once

#include <iosfwd>

namespace weaver
{
    /// Exit codes: 0 success, 1 operational failure, 2 usage error.
    /// Data goes to `out` (or --out files); diagnostics to `err`.
    int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
}
