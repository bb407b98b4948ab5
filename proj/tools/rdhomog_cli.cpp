#include "rdhomog/cli.hpp"

int main(int argc, char **argv) { return rdhomog::cli::run(argc, argv); }
