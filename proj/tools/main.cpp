#include "hmt/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hmt::cli::run_cli(argc, argv, std::cout, std::cerr); }
