#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kdseq {

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on a usage error, 2 on a runtime failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kdseq
