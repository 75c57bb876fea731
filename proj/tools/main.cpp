#include <iostream>

#include "kinn/cli.hpp"

int main(int argc, char** argv) { return kinn::run_cli(argc, argv, std::cout, std::cerr); }
