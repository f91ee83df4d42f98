#include "liipa/cli.hpp"

int main(int argc, char** argv) { return liipa::run_cli(argc, argv); }
