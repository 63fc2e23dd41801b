#include <string>
#include <vector>

#include "rsmdp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rsmdp::run_cli(args);
}
