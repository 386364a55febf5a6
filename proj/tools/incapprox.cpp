#include "incapprox/cli.hpp"

int main(int argc, char** argv) { return incapprox::cli::main(argc, argv); }
