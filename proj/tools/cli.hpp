#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vinestress::cli {

//! Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kUserError = 1;
inline constexpr int kInternalError = 2;

//! Runs the command line `args` (without the program name). Normal output
//! goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace vinestress::cli
