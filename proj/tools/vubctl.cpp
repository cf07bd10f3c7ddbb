#include <iostream>
#include <string>
#include <vector>

#include "vub/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return vub::cli::run(args, std::cout, std::cerr);
}
