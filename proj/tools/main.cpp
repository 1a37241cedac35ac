#include "tractshape/cli.hpp"

int main(int argc, char** argv) { return tractshape::run_command(argc, argv); }
