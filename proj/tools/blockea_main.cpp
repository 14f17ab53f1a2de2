#include "blockea/cli.hpp"

int main(int argc, char** argv) { return blockea::cli::run(argc, argv); }
