#include "covindex/cli.hpp"

int main(int argc, char** argv) { return covindex::cli_main(argc, argv); }
