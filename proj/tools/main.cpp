#include <string>
#include <vector>

#include "haplo/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return haplo::run(args);
}
