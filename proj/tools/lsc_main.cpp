#include <iostream>

#include "lsc/cli/app.hpp"

int main(int argc, char** argv) { return lsc::cli::run(argc, argv, std::cout, std::cerr); }
