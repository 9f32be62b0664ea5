#include <iostream>

#include "resilsim/cli.hpp"

int main(int argc, char** argv) { return resilsim::cli::main(argc, argv, std::cout, std::cerr); }
