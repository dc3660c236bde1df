#include "cli.hpp"

int main(int argc, char** argv) { return ddepth::cli::run(argc, argv); }
