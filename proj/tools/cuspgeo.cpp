#include "cuspgeo/cli.hpp"

int main(int argc, char** argv) { return cuspgeo::cli::main(argc, argv); }
