#include <string>
#include <vector>

#include "gscls/cli.hpp"

int main(int argc, char** argv) {
  return gscls::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
