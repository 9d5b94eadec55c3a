#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dronegate::cli {

/// Runs the command-line surface against an argument list (program name
/// excluded), writing to the given streams so tests can drive it in-process.
///
/// Subcommands: verify <file|->, simulate <file>, eval, gen-dataset,
/// render-kgp, serve. Returns the process exit code: 0 for success or a SAFE
/// verdict, 1 for an UNSAFE verdict, 2 for usage or configuration errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dronegate::cli
