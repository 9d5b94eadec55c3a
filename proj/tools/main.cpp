#include <iostream>
#include <vector>

#include "dronegate/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return dronegate::cli::run_cli(args, std::cout, std::cerr);
}
