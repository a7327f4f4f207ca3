#include <iostream>
#include <string>
#include <vector>

#include "stackelq_cli/cli.hpp"

int main(int argc, char** argv) {
  return stackelq::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
