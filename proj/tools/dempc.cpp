#include <string>
#include <vector>

#include "dempc/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dempc::cli::run(args);
}
