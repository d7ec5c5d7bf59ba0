#include "avabc/cli.hpp"

int main(int argc, char** argv) { return avabc::cli_main(argc, argv); }
