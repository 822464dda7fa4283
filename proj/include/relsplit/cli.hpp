#ifndef RELSPLIT_CLI_HPP
#define RELSPLIT_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace relsplit::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

/// Runs one subcommand. `args` excludes the program name. Diagnostics go to
/// `err`; `out` only receives results of commands that have no output file.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

int main(int argc, char **argv);

} // namespace relsplit::cli

#endif // RELSPLIT_CLI_HPP
