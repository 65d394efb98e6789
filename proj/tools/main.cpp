#include "splitee/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return splitee::cli::run(argc, argv, std::cout, std::cerr); }
