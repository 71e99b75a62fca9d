#pragma once

#include <iostream>

namespace thermadapt {

// Command-line dispatcher. Exit codes: 0 success, 1 domain error, 2 usage
// error. Human-readable tables go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace thermadapt
