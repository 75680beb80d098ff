#include "mmf/cli.hpp"

int main(int argc, char** argv) { return mmf::run_cli(argc, argv); }
