#include <iostream>

#include "ch2/cli.hpp"

int main(int argc, char** argv) { return ch2::cli::run(argc, argv, std::cout, std::cerr); }
