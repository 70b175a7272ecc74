#pragma once

#include <string>
#include <vector>

namespace advw {

// Parses an epsilon list argument: "paper-fgsm" (1%..10% in 1% steps),
// "paper-distill" ({0, 0.7, 1, 2, 3, 5, 10, 20, 30}%) or a comma-separated
// list of fractions in [0, 1].
std::vector<double> parse_epsilon_list(const std::string& arg);

// Command-line entry point (argv without the program name). Subcommands:
// train, attack, sweep, distill, report. Returns 0 on success, 1 on usage
// errors, 2 on runtime errors.
int cli_main(const std::vector<std::string>& args);

}  // namespace advw
