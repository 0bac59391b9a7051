#pragma once

#include <iosfwd>

namespace advisor {

// Entry point of the advisor command. Returns 0 on success, 2 on usage or
// input errors, 1 on numerical failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace advisor
