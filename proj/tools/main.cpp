#include "alphadesk/cli.hpp"

int main(int argc, char** argv) { return alphadesk::run_cli(argc, argv); }
