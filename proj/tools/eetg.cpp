#include "eetg/cli.hpp"

int main(int argc, char** argv) { return eetg::run_cli(argc, argv); }
