#include <iostream>

#include "knowrl/cli.hpp"

int main(int argc, char** argv) { return knowrl::run_cli(argc, argv, std::cout, std::cerr); }
