#include "volseg/cli.hpp"

int main(int argc, char** argv) { return volseg::cli::run(argc, argv); }
