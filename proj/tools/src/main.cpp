#include <iostream>
#include <string>
#include <vector>

#include "cibhash/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cibhash::cli::run(args, std::cout, std::cerr);
}
