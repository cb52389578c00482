#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ngd::app {

// Runs one `ngd` command line (without the program name). Returns 0 on
// success, 1 on a domain error (message on `err`), 2 on a usage error.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);
int run_command(int argc, char** argv);

}  // namespace ngd::app
