#include <iostream>

#include "sasnet/cli.hpp"

int main(int argc, char** argv) { return sasnet::run_cli(argc, argv, std::cout, std::cerr); }
