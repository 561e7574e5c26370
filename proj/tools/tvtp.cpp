#include "tvtp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return tvtp::run_cli(argc, argv, std::cout, std::cerr); }
