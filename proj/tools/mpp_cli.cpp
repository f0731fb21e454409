#include <iostream>

#include "mpp/cli.hpp"

int main(int argc, char** argv) { return mpp::cli_main(argc, argv, std::cout, std::cerr); }
