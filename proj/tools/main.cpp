#include "thermadapt/cli.hpp"

int main(int argc, char** argv) { return thermadapt::run_cli(argc, argv); }
