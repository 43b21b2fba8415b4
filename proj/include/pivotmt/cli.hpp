#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pivotmt {

/// Runs the `pivotmt` command line. `args` excludes the program name.
/// Returns the process exit status: 0 on success, 2 for usage and
/// configuration errors, 3 for unreadable or malformed input, 4 for training
/// failures and 1 for anything else. Failures print a single
/// `error: <class>: <message>` line to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pivotmt
