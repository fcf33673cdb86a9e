#include <iostream>

#include "kancql/cli.hpp"

int main(int argc, char** argv) { return kancql::run_cli(argc, argv, std::cout, std::cerr); }
