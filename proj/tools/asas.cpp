#include <iostream>

#include "asas/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return asas::cli::run(args, std::cout, std::cerr);
}
