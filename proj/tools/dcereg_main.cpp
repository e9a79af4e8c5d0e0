#include "dcereg/cli.hpp"

int main(int argc, char **argv) { return dcereg::run_cli(argc, argv); }
