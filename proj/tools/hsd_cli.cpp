#include "hsd/cli.hpp"

int main(int argc, char** argv) { return hsd::cli::main(argc, argv); }
