#include "tmgan/cli_lib.hpp"

int main(int argc, char** argv) { return tmgan::run_cli(argc, argv); }
