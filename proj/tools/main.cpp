#include <string>
#include <vector>

#include "ihqgan/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ihqgan::cli::run_cli(args);
}
