#include <iostream>

#include "dfir/tools/cli.hpp"

int main(int argc, char** argv) { return dfir::tools::run_cli(argc, argv, std::cout, std::cerr); }
