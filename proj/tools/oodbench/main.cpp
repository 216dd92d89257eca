#include "oodbench/cli.hpp"

int main(int argc, char** argv) { return oodbench::cli::dispatch(argc, argv); }
