#include "commands.hpp"

int main(int argc, char** argv) { return hbma::cli::run(argc, argv); }
