#include "ptctc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ptctc::cli::run(argc, argv, std::cout, std::cerr); }
