#include "mixim/cli.hpp"

int main(int argc, char** argv) { return mixim::cli::run(argc, argv); }
