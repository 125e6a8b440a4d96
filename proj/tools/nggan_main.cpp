#include "nggan/cli.hpp"

int main(int argc, char** argv) { return nggan::cli::run(argc, argv); }
