#include <iostream>
#include <string>
#include <vector>

#include "phrlab/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return phrlab::run_cli(args, std::cout, std::cerr);
}
