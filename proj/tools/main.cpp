#include <iostream>

#include "devfuse_cli.hpp"

int main(int argc, char** argv) {
  return devfuse::cli::dispatch(argc, argv, std::cout, std::cerr);
}
