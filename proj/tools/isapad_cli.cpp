#include <iostream>

#include "isapad/cli/commands.hpp"

int main(int argc, char** argv) { return isapad::cli::run(argc, argv, std::cout, std::cerr); }
