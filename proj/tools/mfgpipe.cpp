#include <iostream>

#include "mfgpipe/cli.hpp"

int main(int argc, char** argv) { return mfg::run_cli(argc, argv, std::cout, std::cerr); }
