#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tdcr {

// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_parse = 1,           // malformed flags or input files
    exit_domain = 2,          // invalid request (bad values, missing files, empty dataset)
    exit_not_converged = 3,   // a solve did not converge or hit a numerical failure
    exit_dimension = 4,       // array sizes in an input file disagree with n
    exit_invariant = 5,       // input parsed but describes an invalid robot
};

// Runs the tool with args[0] as the program name; everything printed goes to
// out (results) and err (diagnostics).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tdcr
