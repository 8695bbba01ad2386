#include "reng/cli.hpp"

int main(int argc, char** argv) { return reng::cli_main(argc, argv); }
