#include "ivrepro/cli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ivrepro::cli::run(argc, argv, std::cout, std::cerr); }
