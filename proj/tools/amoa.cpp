#include <iostream>

#include "amoa/cli.hpp"

int main(int argc, char** argv) { return amoa::run_cli(argc, argv, std::cout, std::cerr); }
