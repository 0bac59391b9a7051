#include <iostream>

#include "advisor/cli.hpp"

int main(int argc, char** argv) { return advisor::run_cli(argc, argv, std::cout, std::cerr); }
