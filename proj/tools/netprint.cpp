#include <iostream>

#include "netprint/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return netprint::cli::run(args, std::cout, std::cerr);
}
