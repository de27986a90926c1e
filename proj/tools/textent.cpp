#include <iostream>

#include "textent/cli.hpp"

int main(int argc, char** argv) {
  return textent::cli::run(argc, argv, std::cout, std::cerr);
}
