#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kanreg {

/// Entry point of the `kanreg` command-line tool; args exclude the program
/// name. Returns the process exit code: 0 on success, 1 when a stage failed,
/// 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kanreg
