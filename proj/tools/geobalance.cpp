#include "geobalance/cli_io.hpp"

int main(int argc, char** argv) { return geobalance::cli::run(argc, argv); }
