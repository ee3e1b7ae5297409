#include <iostream>
#include <string>
#include <vector>

#include "pansharp_cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return pansharp::cli::run(args, std::cout, std::cerr);
}
