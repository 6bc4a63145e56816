#include "icpcov/cli.hpp"

int main(int argc, char** argv) { return icpcov::cli::run(argc, argv); }
