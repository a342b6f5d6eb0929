#include <iostream>

#include "animforge/cli.hpp"

int main(int argc, char** argv) { return animforge::cli::run_cli(argc, argv, std::cout, std::cerr); }
