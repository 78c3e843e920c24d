#include "abxi/cli.hpp"

int main(int argc, char** argv) { return abxi::run_cli(argc, argv); }
