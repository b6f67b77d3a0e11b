#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace efrlfn::cli {

// Runs one subcommand. Returns the process exit code; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace efrlfn::cli
