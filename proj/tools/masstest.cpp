#include "masstest/cli.hpp"

int main(int argc, char** argv) { return masstest::run_cli(argc, argv); }
