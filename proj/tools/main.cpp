#include "polarity/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return polarity::cli::run(argc, argv, std::cin, std::cout, std::cerr);
}
