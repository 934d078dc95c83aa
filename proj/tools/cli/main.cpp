#include "cli.hpp"

int main(int argc, char** argv) { return mmfc::cli::run(argc, argv); }
