#include "memnet/cli.hpp"

int main(int argc, char** argv) { return memnet::cli::run(argc, argv); }
