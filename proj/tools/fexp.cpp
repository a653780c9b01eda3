#include <vector>

#include "fexp/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fexp::cli::run(args);
}
