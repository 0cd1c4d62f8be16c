#include <iostream>
#include <string>
#include <vector>

#include "revdiff/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return revdiff::run_cli(args, std::cout, std::cerr);
}
