#include <iostream>

#include "stoptime/cli.hpp"

int main(int argc, char** argv) {
  return stoptime::run(argc, argv, std::cout, std::cerr);
}
