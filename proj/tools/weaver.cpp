#include <iostream>

#include "weaver/cli.hpp"

int main(int argc, char** argv) { return weaver::run_cli(argc, argv, std::cout, std::cerr); }
