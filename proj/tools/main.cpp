#include <iostream>

#include "p3p_tools/commands.hpp"

int main(int argc, char** argv) { return p3p::cli::run(argc, argv, std::cout, std::cerr); }
