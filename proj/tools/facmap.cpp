#include <iostream>

#include "facmap/cli.hpp"

int main(int argc, char** argv) { return facmap::cli::run(argc, argv, std::cout, std::cerr); }
