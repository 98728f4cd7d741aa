#include "kendallseg/cli.hpp"

int main(int argc, char** argv) { return kseg::run_cli(argc, argv); }
