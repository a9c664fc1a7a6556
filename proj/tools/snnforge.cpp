#include <string>
#include <vector>

#include "snnforge/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return snnforge::cli_dispatch(args);
}
