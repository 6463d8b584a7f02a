#include <string>
#include <vector>

#include "uwofdm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return uwofdm::run_cli(args);
}
