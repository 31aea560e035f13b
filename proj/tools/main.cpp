#include <iostream>

#include "relparcel/cli.hpp"

int main(int argc, char** argv) { return relparcel::dispatch(argc, argv, std::cout, std::cerr); }
