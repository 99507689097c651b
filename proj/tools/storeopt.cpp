#include "storeopt/cli.hpp"

int main(int argc, char** argv) { return storeopt::cli::run(argc, argv); }
