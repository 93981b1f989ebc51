#include "nsdp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return nsdp::run_cli(argc, argv, std::cout, std::cerr); }
