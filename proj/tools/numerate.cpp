#include <iostream>

#include "numerate/cli.hpp"

int main(int argc, char** argv) { return numerate::cli::run(argc, argv, std::cout, std::cerr); }
