#include <iostream>
#include <string>
#include <vector>

#include "senm/pipeline.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return senm::run_command(args, std::cout, std::cerr);
}
