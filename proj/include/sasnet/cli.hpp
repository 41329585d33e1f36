#pragma once

#include <ostream>

namespace sasnet {

/// Entry point behind the `sasnet` executable. Returns 0 on success, 2 on a
/// usage error and 1 on any other failure; errors go to `err` as a single
/// `error: <kind>: <detail>` line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sasnet
