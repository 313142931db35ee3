#include "cli.hpp"

int main(int argc, char** argv) { return fsml::cli::run(argc, argv); }
