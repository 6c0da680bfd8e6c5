#include "soclab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return soclab::cli::run(argc, argv, std::cout, std::cerr); }
