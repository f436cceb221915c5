#include "toposeg/cli.hpp"

int main(int argc, char** argv) { return toposeg::cli::cli_main(argc, argv); }
