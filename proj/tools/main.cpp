#include "adbn/cli.hpp"

int main(int argc, char** argv) { return adbn::run_cli(argc, argv); }
