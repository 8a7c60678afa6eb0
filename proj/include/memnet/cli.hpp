#pragma once

#include <string>
#include <vector>

namespace memnet::cli {

// Subcommands: synth, prepare, train, eval, baseline, grid. Returns the
// process exit code; 0 only when the command completed and wrote its outputs.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);  // args without the program name

}  // namespace memnet::cli
