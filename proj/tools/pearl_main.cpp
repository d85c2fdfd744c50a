#include "pearl/cli.hpp"

int main(int argc, char** argv) { return pearl::cli::dispatch(argc, argv); }
