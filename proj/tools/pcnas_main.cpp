#include <iostream>
#include <string>
#include <vector>

#include "pcnas/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pcnas::run_cli(args, std::cout, std::cerr);
}
