#ifndef STWF_CLI_HPP
#define STWF_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace stwf::cli {

/*
 * Experiment driver. `args` excludes the program name; the first element is
 * the subcommand (gen-synthetic, train-h, learn-response, train, evaluate,
 * sweep, audit, reproduce-example).
 *
 * Returns 0 on success, 1 on invalid input or usage, 2 on runtime failure.
 */
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, const char* const* argv);

}  // namespace stwf::cli

#endif  // STWF_CLI_HPP
