#include <iostream>
#include <string>
#include <vector>

#include "mitd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mitd::run_cli(args, std::cout, std::cerr);
}
