#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return gxe::cli::run(argc, argv, std::cin, std::cout, std::cerr);
}
