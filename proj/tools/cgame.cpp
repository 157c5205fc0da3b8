#include <iostream>

#include "cgame/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cgame::cli_run(args, std::cout, std::cerr);
}
