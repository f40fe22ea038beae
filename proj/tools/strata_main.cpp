#include "strata/config.hpp"

int main(int argc, char** argv) { return strata::run_cli(argc, argv); }
