#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sparseg {

/// Runs the `sparseg` command line. args excludes the program name.
/// Returns 0 on success or --help, 2 on usage errors, 1 on runtime failures.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv);

}  // namespace sparseg
