#include <iostream>

#include "outfitrec/cli.hpp"

int main(int argc, char** argv) {
  return outfitrec::cli_dispatch(argc, argv, std::cout, std::cerr);
}
