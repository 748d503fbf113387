#include <string>
#include <vector>

#include "cpindoor/cli.hpp"

int main(int argc, char** argv) {
  return cpindoor::cli::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
