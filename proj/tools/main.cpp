#include <iostream>

#include "basiccs/cli.hpp"

int main(int argc, char** argv) { return basiccs::run_cli(argc, argv, std::cout, std::cerr); }
