#include "cueforge/cli.hpp"

int main(int argc, char** argv) { return cueforge::cli::run(argc, argv); }
