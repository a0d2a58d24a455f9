#include <iostream>

#include "singext/cli.hpp"

int main(int argc, char** argv) { return singext::cli_main(argc, argv, std::cout, std::cerr); }
