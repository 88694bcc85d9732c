#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tsp::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one subcommand (simulate, cluster, fit, cv, project, report). `args`
/// excludes the program name. Returns 0 on success, 2 on usage errors and
/// 1 on runtime errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tsp::cli
