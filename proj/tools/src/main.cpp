#include <iostream>

#include "pprm/cli.hpp"

int main(int argc, char** argv) {
  return pprm::cli::run(argc, argv, std::cout, std::cerr);
}
