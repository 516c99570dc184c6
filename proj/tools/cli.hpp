#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pplprompt::cli {

/// Runs one invocation. `args` excludes the program name. Data goes to `out`,
/// logs and diagnostics to `err`. Returns 0 on success, 1 on runtime failure
/// and 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace pplprompt::cli
