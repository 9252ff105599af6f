#include "dpawno/cli.hpp"

int main(int argc, char** argv) { return dpawno::cli::run(argc, argv); }
