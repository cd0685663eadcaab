#pragma once

#include <iosfwd>

namespace calproj {

// Entry point of the calproj tool. Usage errors and malformed configuration
// return 2, runtime failures 1.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace calproj
