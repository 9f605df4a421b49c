#pragma once

#include <ostream>

namespace eqa::tools {

// Runs the built-in oracle checks, printing one line per suite. Returns the
// number of failed suites.
int run_selftest(std::ostream& out);

}  // namespace eqa::tools
