#include <iostream>

#include "evoaug/cli.hpp"

int main(int argc, char** argv) { return evoaug::run_cli(argc, argv, std::cout, std::cerr); }
