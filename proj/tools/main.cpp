#include <iostream>

#include "agentorch/cli.hpp"

int main(int argc, char** argv) { return agentorch::run_cli(argc, argv, std::cout, std::cerr); }
