#pragma once

#include <iosfwd>

namespace covsim::cli {

enum exit_code : int { kOk = 0, kInputError = 1, kFindings = 2 };

// Parses argv and dispatches to a subcommand. Returns only the codes above.
int run(int argc, char const* const* argv, std::ostream& out,
        std::ostream& err);

}  // namespace covsim::cli
