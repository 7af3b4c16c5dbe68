#include "indimart/cli.hpp"

int main(int argc, char** argv) { return indimart::run_cli(argc, argv); }
