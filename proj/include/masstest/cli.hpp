#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace masstest {

// Command-line entry point. `args` excludes the program name. Returns 0 on
// success, 1 on a usage error and 2 on a data or I/O error. Every file written
// is announced on `out` as "wrote <path>".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace masstest
