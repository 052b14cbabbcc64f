#include "greenbtc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return greenbtc::cli::run_cli(argc, argv, std::cout, std::cerr);
}
