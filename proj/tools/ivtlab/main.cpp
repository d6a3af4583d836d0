#include <iostream>

#include "ivtlab/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ivtlab::run_cli(args, std::cout, std::cerr);
}
