#include "atomcal/cli.hpp"

int main(int argc, char** argv) { return atomcal::cli::main(argc, argv); }
