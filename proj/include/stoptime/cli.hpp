#pragma once

#include <iosfwd>

namespace stoptime {

// Entry point behind main(). Catches module errors and maps them onto the
// exit-code contract: 0 success, 1 usage, 2 parse/invariant failure,
// 3 budget exhausted. Output and diagnostics go to the given streams.
int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err);

}  // namespace stoptime
