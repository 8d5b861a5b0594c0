#include <iostream>

#include "far3d/cli.hpp"

int main(int argc, char** argv) {
  return far3d::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
