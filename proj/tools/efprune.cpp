#include "commands.hpp"

int main(int argc, char** argv) { return efprune::cli::main(argc, argv); }
