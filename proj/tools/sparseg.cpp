#include "sparseg/cli.hpp"

int main(int argc, char** argv) { return sparseg::cli_dispatch(argc, argv); }
