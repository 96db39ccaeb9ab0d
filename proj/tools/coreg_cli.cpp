#include <iostream>

#include "coreg/cli.hpp"

int main(int argc, char** argv) { return coreg::run_cli(argc, argv, std::cout, std::cerr); }
