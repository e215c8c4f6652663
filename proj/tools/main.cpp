#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return bellnoise::cli::run(argc, argv, std::cout, std::cerr);
}
