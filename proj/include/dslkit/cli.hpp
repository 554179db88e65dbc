#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dslkit::cli {

// Batch front door; exposed as a function so tests can drive subcommands
// in-process.  Returns the process exit code: 0 ok, 1 user error, 2 internal.
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

} // namespace dslkit::cli
