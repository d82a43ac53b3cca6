#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  return sirenrope::cli::run({argv, argv + argc}, std::cout, std::cerr);
}
