#include "psqrnn/cli.hpp"

int main(int argc, char** argv) { return psqrnn::cli::run(argc, argv); }
