#include <iostream>

#include "asymdiff/cli/commands.hpp"

int main(int argc, char** argv) { return asymdiff::cli::run(argc, argv, std::cout, std::cerr); }
