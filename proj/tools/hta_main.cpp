#include "hta/cli.hpp"

int main(int argc, char** argv) { return hta::run_cli(argc, argv); }
