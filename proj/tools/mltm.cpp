#include <iostream>

#include "mltm/cli.hpp"

int main(int argc, char** argv) { return mltm::run_cli(argc, argv, std::cout, std::cerr); }
