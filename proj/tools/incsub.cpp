#include "incsub/cli.hpp"

int main(int argc, char** argv) { return incsub::cli::dispatch(argc, argv); }
