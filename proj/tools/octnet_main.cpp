#include "octnet/cli.hpp"

int main(int argc, char** argv) { return octnet::cli_main(argc, argv); }
