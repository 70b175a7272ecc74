#include <string>
#include <vector>

#include "advw/cli.hpp"

int main(int argc, char** argv) {
  return advw::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
