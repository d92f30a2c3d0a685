#include "stwf/cli.hpp"

int main(int argc, char** argv) { return stwf::cli::run_command(argc, argv); }
