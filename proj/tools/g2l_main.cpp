#include <iostream>
#include <string>
#include <vector>

#include "g2l/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return g2l::cli::run(args, std::cout, std::cerr);
}
