#include "gmclab/cli.hpp"

int main(int argc, char** argv) { return gmclab::cli_main(argc, argv); }
