#include <iostream>
#include <string>
#include <vector>

#include "svs/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return svs::cli::run(args, std::cout, std::cerr);
}
