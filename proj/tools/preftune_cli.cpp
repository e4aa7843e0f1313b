#include <string>
#include <vector>

#include "preftune/cli.hpp"

int main(int argc, char** argv) { return preftune::run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
