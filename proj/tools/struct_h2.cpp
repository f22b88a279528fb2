#include <iostream>

#include "structh2/cli.hpp"

int main(int argc, char** argv) {
  return structh2::cli::run(argc, argv, std::cout, std::cerr);
}
