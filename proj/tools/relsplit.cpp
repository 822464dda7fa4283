#include "relsplit/cli.hpp"

int main(int argc, char **argv) { return relsplit::cli::main(argc, argv); }
