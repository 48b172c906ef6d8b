#include <iostream>

#include "spindepth/cli.hpp"

int main(int argc, char** argv) { return spindepth::run_cli(argc, argv, std::cout, std::cerr); }
