#include "rdhte/run.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return rdhte::cli_main(argc, argv, std::cout, std::cerr);
}
