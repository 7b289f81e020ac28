#include "polarseg/cli.hpp"

int main(int argc, char** argv) { return polarseg::cli_main(argc, argv); }
