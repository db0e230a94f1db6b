#include "cdo/commands.hpp"

int main(int argc, char** argv) { return cdo::cli::run(argc, argv); }
