#include "cli.hpp"

int main(int argc, char** argv) {
  return octden::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
