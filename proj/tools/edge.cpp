#include "edge/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return edge::cli::main(argc, argv, std::cout, std::cerr); }
